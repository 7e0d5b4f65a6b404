# engines package
