// placeholder during dependency fetch
