"""Independent reference computations used to pin expected values.

Nothing here imports the package under test.
"""

import math


def tokenize(text):
    # character-class scan instead of a regex: words are runs of alnum/_,
    # every other non-space character is its own token
    out, word = [], ""
    for ch in text.lower():
        if ch.isalnum() or ch == "_":
            word += ch
            continue
        if word:
            out.append(word)
            word = ""
        if not ch.isspace():
            out.append(ch)
    if word:
        out.append(word)
    return out


def brute_force_bleu(hyp_text, ref_text):
    """Sentence BLEU-4 by exhaustive n-gram enumeration with nested loops."""
    hyp, ref = tokenize(hyp_text or ""), tokenize(ref_text)
    if not hyp:
        return 0.0
    precisions = []
    for n in (1, 2, 3, 4):
        hyp_grams = [hyp[i:i + n] for i in range(len(hyp) - n + 1)]
        ref_grams = [ref[i:i + n] for i in range(len(ref) - n + 1)]
        matched = 0
        seen = []
        for g in hyp_grams:
            if g in seen:
                continue
            seen.append(g)
            in_hyp = sum(1 for h in hyp_grams if h == g)
            in_ref = sum(1 for r in ref_grams if r == g)
            matched += min(in_hyp, in_ref)
        total = len(hyp_grams)
        if matched == 0:
            if n == 1:
                return 0.0
            precisions.append(1.0 / (total + 1))
        else:
            precisions.append(matched / total)
    geo = 1.0
    for p in precisions:
        geo *= p
    geo = geo ** 0.25
    c, r = len(hyp), len(ref)
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return bp * geo


def bag_cosine(a, b):
    """Cosine of word-count vectors, computed over an explicit sorted vocabulary."""
    wa = [w for w in tokenize(a) if w.isalnum() or "_" in w]
    wb = [w for w in tokenize(b) if w.isalnum() or "_" in w]
    vocab = sorted(set(wa) | set(wb))
    va = [wa.count(w) for w in vocab]
    vb = [wb.count(w) for w in vocab]
    dot = sum(x * y for x, y in zip(va, vb))
    na = math.sqrt(sum(x * x for x in va))
    nb = math.sqrt(sum(y * y for y in vb))
    return 0.0 if na == 0 or nb == 0 else dot / (na * nb)


def around_by_division(n):
    """Even split using exact decimal arithmetic, rounded half-even to 2 places."""
    from decimal import ROUND_HALF_EVEN, Decimal

    return [
        float((Decimal(k * 360) / Decimal(n)).quantize(Decimal("0.01"), rounding=ROUND_HALF_EVEN))
        for k in range(n)
    ]
