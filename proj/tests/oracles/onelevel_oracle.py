"""Reference values for the one-level test unit tests.

Linear complexity by exhaustive search over LFSRs, overlapping-template class
probabilities by exact rational dynamic programming, and longest-run class
probabilities by exact integer counting. Printed values are frozen in
tests/test_onelevel.cpp.
"""
from fractions import Fraction
from itertools import product


def lfsr_generates(bits, taps):
    L = len(taps)
    for i in range(L, len(bits)):
        v = 0
        for j, c in enumerate(taps, start=1):
            v ^= c & bits[i - j]
        if v != bits[i]:
            return False
    return True


def linear_complexity_exhaustive(bits, max_len):
    if not any(bits):
        return 0
    for L in range(1, max_len + 1):
        for taps in product((0, 1), repeat=L):
            if lfsr_generates(bits, taps):
                return L
    return None


def overlap_probs(m, tlen, kmax):
    half = Fraction(1, 2)
    state = {(0, 0): Fraction(1)}
    for _ in range(m):
        nxt = {}
        for (r, c), p in state.items():
            q = p * half
            nxt[(0, c)] = nxt.get((0, c), 0) + q
            if r + 1 < tlen:
                key = (r + 1, c)
            else:
                key = (r, min(c + 1, kmax))
            nxt[key] = nxt.get(key, 0) + q
        state = nxt
    out = [Fraction(0)] * (kmax + 1)
    for (r, c), p in state.items():
        out[c] += p
    return out


def count_no_run(m, t):
    # strings of length m without t+1 consecutive ones
    a = [0] * (m + 1)
    for j in range(m + 1):
        if j <= t:
            a[j] = 2 ** j
        else:
            a[j] = sum(a[j - i] for i in range(1, t + 2))
    return a[m]


def longest_probs(m, bounds):
    cdf = [Fraction(count_no_run(m, b), 2 ** m) for b in bounds]
    probs = [cdf[0]] + [cdf[i] - cdf[i - 1] for i in range(1, len(cdf))] + [1 - cdf[-1]]
    return probs


def main():
    seq = [int(c) for c in "1101011110001"]
    print("linear complexity 1101011110001 =", linear_complexity_exhaustive(seq, 6))
    probs = overlap_probs(1032, 9, 5)
    print("overlap exact:", ["%.17g" % float(p) for p in probs])
    print("longest m=8:", ["%.17g" % float(p) for p in longest_probs(8, [1, 2, 3])])
    print("longest m=128:", ["%.17g" % float(p) for p in longest_probs(128, [4, 5, 6, 7, 8])])
    print("longest m=10000:", ["%.17g" % float(p) for p in longest_probs(10000, list(range(10, 16)))])


if __name__ == "__main__":
    main()
