def total(items):
    """Add up every item."""
    acc = 0
    for item in items:
        acc += item
    return acc
