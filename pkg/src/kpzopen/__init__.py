"""Open ASEP stationary measures, Askey-Wilson and continuous dual Hahn processes, and the open KPZ limit."""
