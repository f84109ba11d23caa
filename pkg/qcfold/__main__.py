from qcfold.cli import main

main()
