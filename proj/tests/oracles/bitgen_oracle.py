"""Reference outputs for the generator tests.

MT19937 comes from CPython's random module (set to the given state), the
SHA-1 compression function and WELL19937a are transcribed here from their
definitions. Printed values are frozen in tests/test_bitgen.cpp.
"""
import random
import struct

MASK32 = 0xFFFFFFFF


def mt_init_genrand(s):
    mt = [0] * 624
    mt[0] = s & MASK32
    for i in range(1, 624):
        mt[i] = (1812433253 * (mt[i - 1] ^ (mt[i - 1] >> 30)) + i) & MASK32
    return mt


def mt_from_genrand(s):
    r = random.Random()
    r.setstate((3, tuple(mt_init_genrand(s) + [624]), None))
    return r


def mt_from_key(words):
    # CPython seeds with init_by_array on the 32-bit words of the integer,
    # least significant word first.
    value = 0
    for i, w in enumerate(words):
        value |= w << (32 * i)
    r = random.Random()
    r.seed(value)
    return r


def rotl(x, n):
    return ((x << n) | (x >> (32 - n))) & MASK32


def sha1_compress(state, block):
    w = list(struct.unpack(">16I", block))
    for t in range(16, 80):
        w.append(rotl(w[t - 3] ^ w[t - 8] ^ w[t - 14] ^ w[t - 16], 1))
    a, b, c, d, e = state
    for t in range(80):
        if t < 20:
            f, k = (b & c) | (~b & d), 0x5A827999
        elif t < 40:
            f, k = b ^ c ^ d, 0x6ED9EBA1
        elif t < 60:
            f, k = (b & c) | (b & d) | (c & d), 0x8F1BBCDC
        else:
            f, k = b ^ c ^ d, 0xCA62C1D6
        temp = (rotl(a, 5) + (f & MASK32) + e + k + w[t]) & MASK32
        a, b, c, d, e = temp, a, rotl(b, 30), c, d
    return [(x + y) & MASK32 for x, y in zip(state, [a, b, c, d, e])]


IV = [0x67452301, 0xEFCDAB89, 0x98BADCFE, 0x10325476, 0xC3D2E1F0]


def sha1g_blocks(xkey_hex, count):
    xkey = int(xkey_hex, 16)
    out = []
    for _ in range(count):
        block = xkey.to_bytes(20, "big") + bytes(44)
        g = sha1_compress(IV, block)
        gval = 0
        for word in g:
            gval = (gval << 32) | word
        out.append(gval.to_bytes(20, "big").hex())
        xkey = (xkey + gval + 1) % (1 << 160)
    return out


def well19937a(init, count):
    R, M1, M2, M3 = 624, 70, 179, 449
    s = list(init)
    i = 0
    out = []
    for _ in range(count):
        v0 = s[i]
        z0 = (s[(i - 1) % R] & 0x80000000) | (s[(i - 2) % R] & 0x7FFFFFFF)
        vm1 = s[(i + M1) % R]
        z1 = (v0 ^ (v0 << 25)) & MASK32
        z1 ^= vm1 ^ (vm1 >> 27)
        vm3 = s[(i + M3) % R]
        z2 = (s[(i + M2) % R] >> 9) ^ (vm3 ^ (vm3 >> 1))
        new_v1 = z1 ^ z2
        s[i] = new_v1
        j = (i - 1) % R
        s[j] = (z0 ^ (z1 ^ (z1 << 9)) ^ (z2 ^ (z2 << 21)) ^ (new_v1 ^ (new_v1 >> 21))) & MASK32
        i = j
        out.append(s[i])
    return out


def main():
    r = mt_from_genrand(5489)
    print("mt genrand(5489):", [r.getrandbits(32) for _ in range(3)])
    r = mt_from_key([0x123, 0x234, 0x345, 0x456])
    print("mt by_array:", [r.getrandbits(32) for _ in range(5)])
    # 8-byte seed for integer 1 -> words [0, 1] (big-endian split)
    r = mt_from_key([0, 1])
    print("mt seed_from_u64(1):", [r.getrandbits(32) for _ in range(4)])

    print("sha1g default key:", sha1g_blocks("ec822a619d6ed5d9492218a7a4c5b15d57c61601", 3))

    r = mt_from_key([0, 1])
    init = [r.getrandbits(32) for _ in range(624)]
    print("well seed_from_u64(1):", well19937a(init, 5))
    r = mt_from_genrand(5489)
    init = [r.getrandbits(32) for _ in range(624)]
    outs = well19937a(init, 1000)
    print("well genrand(5489) first 3:", outs[:3], "output 1000:", outs[-1])


if __name__ == "__main__":
    main()
