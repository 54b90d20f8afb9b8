"""Reference implementations of the batch kernels in plain Python/numpy.

Signatures mirror ``_core.pyx`` exactly; outputs are written into the
preallocated arrays passed by the caller.
"""
import numpy as np


def encode(info, block, enc_word, enc_len, enc_next, initial, preamble, tail, out, nbits):
    n_frames, k = info.shape
    pre = preamble.tolist()
    words = [[format(int(w), f"0{int(n)}b") if n else "" for w, n in zip(rw, rn)]
             for rw, rn in zip(enc_word, enc_len)]
    nxt = enc_next.tolist()
    weights = [1 << (block - 1 - j) for j in range(block)]
    for f in range(n_frames):
        row = info[f].tolist()
        s = initial
        parts = []
        for i in range(0, k, block):
            u = sum(b * w for b, w in zip(row[i:i + block], weights))
            parts.append(words[s][u])
            s = nxt[s][u]
        if tail:
            parts.append(words[s][0])
        bits = pre + [int(c) for c in "".join(parts)]
        out[f, :len(bits)] = bits
        nbits[f] = len(bits)


def runs(bits, nbits, runs_out, nruns):
    for f in range(bits.shape[0]):
        n = int(nbits[f])
        edges = np.flatnonzero(np.diff(bits[f, :n])) + 1
        r = np.diff(np.concatenate(([0], edges, [n])))
        runs_out[f, :len(r)] = r
        nruns[f] = len(r)


def expand(runs_in, nruns, first, out, nbits):
    for f in range(runs_in.shape[0]):
        r = runs_in[f, :nruns[f]]
        levels = (np.arange(len(r)) + first[f]) % 2
        b = np.repeat(levels, r)
        out[f, :len(b)] = b
        nbits[f] = len(b)


def decode(bits, nbits, dec_word, dec_len, dec_adv, dec_next, width, initial, skip, k, out):
    table = [[(format(int(w), f"0{int(n)}b") if n else "", int(a), int(s))
              for w, n, a, s in zip(rw, rn, ra, rs)]
             for rw, rn, ra, rs in zip(dec_word, dec_len, dec_adv, dec_next)]
    for f in range(bits.shape[0]):
        n = int(nbits[f])
        row = bits[f, :n].tolist()
        pad = 1 - row[-1]
        row = row + [pad] * width
        pos, state = skip, initial
        dec = []
        while pos < n and len(dec) < k:
            w = 0
            for j in range(pos, pos + width):
                w = (w << 1) | row[j]
            word, adv, state = table[state][w]
            dec.extend(int(c) for c in word)
            pos += adv
        dec = (dec + [0] * k)[:k]
        out[f, :] = dec
