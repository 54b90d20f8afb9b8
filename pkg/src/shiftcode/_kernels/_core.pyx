# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batch kernels: encoder, run parser, run expander, window decoder."""
import numpy as np
cimport numpy as cnp

ctypedef cnp.uint8_t u8
ctypedef cnp.int64_t i64


def encode(const u8[:, :] info, int block, const i64[:, :] enc_word, const i64[:, :] enc_len,
           const i64[:, :] enc_next, int initial, const u8[:] preamble, int tail,
           u8[:, :] out, i64[:] nbits):
    cdef Py_ssize_t n_frames = info.shape[0], k = info.shape[1]
    cdef Py_ssize_t f, i, j, pos
    cdef int s, u, m, n_blocks = k // block
    cdef i64 w
    with nogil:
        for f in range(n_frames):
            pos = 0
            for j in range(preamble.shape[0]):
                out[f, pos] = preamble[j]
                pos += 1
            s = initial
            for i in range(n_blocks + tail):
                u = 0
                if i < n_blocks:
                    for j in range(block):
                        u = (u << 1) | info[f, i * block + j]
                w = enc_word[s, u]
                m = <int>enc_len[s, u]
                for j in range(m):
                    out[f, pos] = (w >> (m - 1 - j)) & 1
                    pos += 1
                s = <int>enc_next[s, u]
            nbits[f] = pos


def runs(const u8[:, :] bits, const i64[:] nbits, i64[:, :] runs_out, i64[:] nruns):
    cdef Py_ssize_t n_frames = bits.shape[0], f, i, r
    cdef i64 n, length
    with nogil:
        for f in range(n_frames):
            n = nbits[f]
            r = 0
            length = 1
            for i in range(1, n):
                if bits[f, i] == bits[f, i - 1]:
                    length += 1
                else:
                    runs_out[f, r] = length
                    r += 1
                    length = 1
            runs_out[f, r] = length
            nruns[f] = r + 1


def expand(const i64[:, :] runs_in, const i64[:] nruns, const u8[:] first, u8[:, :] out, i64[:] nbits):
    cdef Py_ssize_t n_frames = runs_in.shape[0], f, i, j, pos
    cdef u8 level
    with nogil:
        for f in range(n_frames):
            pos = 0
            level = first[f]
            for i in range(nruns[f]):
                for j in range(runs_in[f, i]):
                    out[f, pos] = level
                    pos += 1
                level ^= 1
            nbits[f] = pos


def decode(const u8[:, :] bits, const i64[:] nbits, const i64[:, :] dec_word, const i64[:, :] dec_len,
           const i64[:, :] dec_adv, const i64[:, :] dec_next, int width, int initial, int skip,
           int k, u8[:, :] out):
    cdef Py_ssize_t n_frames = bits.shape[0], f, j, p
    cdef i64 n, pos, w, word
    cdef int state, m, got, pad, b, q
    with nogil:
        for f in range(n_frames):
            n = nbits[f]
            pad = 1 - bits[f, n - 1]
            pos = skip
            state = initial
            got = 0
            while pos < n and got < k:
                w = 0
                for j in range(width):
                    p = pos + j
                    b = bits[f, p] if p < n else pad
                    w = (w << 1) | b
                word = dec_word[state, w]
                m = <int>dec_len[state, w]
                for q in range(m):
                    if got < k:
                        out[f, got] = (word >> (m - 1 - q)) & 1
                        got += 1
                pos += dec_adv[state, w]
                state = <int>dec_next[state, w]
            while got < k:
                out[f, got] = 0
                got += 1
