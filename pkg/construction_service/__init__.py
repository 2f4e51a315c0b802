from dotenv import load_dotenv

# environment from .env (log level, log directory)
load_dotenv()
