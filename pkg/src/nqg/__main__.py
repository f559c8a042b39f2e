from nqg.cli import main

main()
