"""Pure-Python matrix kernels.

Reference implementation of the dense kernels backing :mod:`mmvnmf.matrix`.
The compiled extension in ``_kernels.pyx`` mirrors these loops operation for
operation so that both backends produce bit-identical IEEE-754 results; any
change here must be ported there.

All kernels take flat row-major ``array('d')`` buffers plus dimensions and
return fresh buffers.  Shape validation lives in the caller.
"""

from array import array


def matmul(a, ar, ac, b, bc):
    out = array("d", bytes(8 * ar * bc))
    for i in range(ar):
        ia = i * ac
        io = i * bc
        for j in range(bc):
            s = 0.0
            for k in range(ac):
                s += a[ia + k] * b[k * bc + j]
            out[io + j] = s
    return out


def hadamard(a, b):
    return array("d", [x * y for x, y in zip(a, b)])


def divide_guarded(num, den, eps):
    # Entrywise num / max(den, eps); eps > 0 keeps the result finite.
    return array("d", [x / (y if y > eps else eps) for x, y in zip(num, den)])


def frobenius_sq(a):
    s = 0.0
    for x in a:
        s += x * x
    return s


def transpose(a, r, c):
    out = array("d", bytes(8 * r * c))
    for i in range(r):
        ia = i * c
        for j in range(c):
            out[j * r + i] = a[ia + j]
    return out


def add(a, b):
    return array("d", [x + y for x, y in zip(a, b)])


def sub(a, b):
    return array("d", [x - y for x, y in zip(a, b)])


def scale(a, s):
    return array("d", [x * s for x in a])


def column_argmax(a, r, c):
    # Ties resolve to the smallest row index (strict > while scanning down).
    out = []
    for j in range(c):
        best_i = 0
        best = a[j]
        for i in range(1, r):
            v = a[i * c + j]
            if v > best:
                best = v
                best_i = i
        out.append(best_i)
    return out
