"""
Main entry point for the perfclip command line.

Example usage:
    python -m perfclip oracle --preset quadratic
"""
import logging
import sys

from .cli import dispatch

if __name__ == "__main__":
    try:
        sys.exit(dispatch())
    except KeyboardInterrupt:
        logging.info("Interrupted by user")
        sys.exit(0)
    except Exception as e:
        logging.error(f"Fatal error: {str(e)}", exc_info=True)
        sys.exit(1)
