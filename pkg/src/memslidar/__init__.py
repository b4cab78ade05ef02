"""MEMS-LiDAR simulation and 3D person-detection dataset tooling."""
