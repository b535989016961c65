import argparse


def seeds_arg(default):
    p = argparse.ArgumentParser()
    p.add_argument("--seeds", type=int, nargs="+", default=list(default), help="experiment seeds")
    return p
