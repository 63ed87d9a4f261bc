def flatten(nested):
    """Flatten one level of nesting."""
    result = []
    for chunk in nested:
        result.extend(chunk)
    return result
