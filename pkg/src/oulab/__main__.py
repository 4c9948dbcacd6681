from .spectra_cli import main

main()
