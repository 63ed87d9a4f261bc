def is_even(n):
    """Check whether n is even."""
    if n % 2 == 0:
        return True
    return False
