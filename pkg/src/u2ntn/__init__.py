"""Monte Carlo and analytical uplink reliability for buried LoRaWAN devices
served by UAV, HAP and LEO-satellite gateways."""

__version__ = "0.1.0"
