from mmwave_map_localization.cli import main

if __name__ == '__main__':
    main()
