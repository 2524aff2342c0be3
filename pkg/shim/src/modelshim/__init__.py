from .config import ShimConfig, default_instruction_dir
from .server import create_app
from .toy import ToyModels

__version__ = "0.1.0"

__all__ = ["ShimConfig", "ToyModels", "create_app", "default_instruction_dir"]
