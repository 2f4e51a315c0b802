from dotenv import load_dotenv

# environment from .env (log level, worker count)
load_dotenv()
