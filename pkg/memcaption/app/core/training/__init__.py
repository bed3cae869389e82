"""
Entrenamiento: Adam con clipping, bucle de épocas y checkpoints.
"""
