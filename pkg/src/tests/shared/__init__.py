# Shared helpers package
