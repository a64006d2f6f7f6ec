from trapdoor.cli import main

main()
