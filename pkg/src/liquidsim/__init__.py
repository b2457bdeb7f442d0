"""Multi-agent Almgren-Chriss liquidation simulator and DDPG trainer."""
