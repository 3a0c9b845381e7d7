def main() -> None:
    """Run the sgnet.cli.main function.

    In addition, make it possible to run without the -m flag.
    """
    import sys

    try:
        import sgnet.cli
    except ImportError:
        from os import path

        sys.path.append(path.abspath(path.join(__file__, "../..")))

        import sgnet.cli

    sys.exit(sgnet.cli.main())


if __name__ == "__main__":
    main()
