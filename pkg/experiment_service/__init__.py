from dotenv import load_dotenv

# environment from .env (output directory, worker count, logging)
load_dotenv()

__version__ = "0.1.0"
