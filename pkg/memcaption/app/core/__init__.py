"""
Core - Componentes centrales de memcaption.
"""
