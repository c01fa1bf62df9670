from .constants import PACKAGE_NAME
from .main import app

app(prog_name=PACKAGE_NAME)
