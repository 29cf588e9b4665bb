"""
Shared runner for the test_*.py scripts when they are executed directly
(python test_grid.py); pytest collects the same functions on its own.
"""
import traceback
from decimal import Decimal
from timeit import default_timer as timer

import numpy as np

from cmdnls.config import DEFAULT_SEED


def make_rng(seed=DEFAULT_SEED):
    return np.random.default_rng(seed)


def expect_close(what, got, correct, tol):
    if not np.all(np.abs(np.asarray(got) - np.asarray(correct)) <= tol):
        raise Exception(what, 'error on', got, ', correct:', correct, ', tol:', tol)


def expect_raises(what, error, func, *args, **kwargs):
    try:
        func(*args, **kwargs)
    except error:
        return
    raise Exception(what, 'error: expected', error.__name__)


def run_tests(tests):
    score = 0
    start = timer()
    for test in tests:
        try:
            test()
            score += 1
            print("PASS", test.__name__)
        except Exception as e:
            print("FAIL", test.__name__)
            print(e)
            traceback.print_exc()
    end = timer()
    print("Time taken: ", Decimal(end - start).quantize(Decimal('0.01')), "seconds")
    print("Total score: ", score, "/", len(tests))
    return score
