def read_config(path):
    try:
        with open(path) as handle:
            return handle.read().splitlines()
    except OSError:
        return []
