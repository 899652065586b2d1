"""Command-line entry point: ``python app.py verify --quick``."""
from funess.main import main

if __name__ == "__main__":
    main()
