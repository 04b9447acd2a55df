# Empty __init__ to mark directory as package
