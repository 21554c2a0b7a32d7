class BridgeError(Exception):
    """Invalid input data or configuration; the CLI maps this to exit 2."""
