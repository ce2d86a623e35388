"""Edge-diffraction sensing and edge-lattice focusing."""
