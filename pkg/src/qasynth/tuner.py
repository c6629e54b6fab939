"""Desk-scale soft prompt tuning on a frozen byte-level recurrent LM.

The generating model is a tiny Elman-style recurrence over a 259-token
vocabulary (256 byte values plus BOS/EOS/SEP markers):

    s_t = tanh(W_x x_t + W_s s_{t-1} + b_s),  s_0 = 0
    logits_t = W_o s_t + b_o

All its parameters stay frozen. The only trainable object is a soft prompt,
an m x d matrix whose rows are fed as the first m inputs before any token
embeddings. Training minimizes cross-entropy of the target segment (answer,
SEP, question, EOS) given the language-prefixed context, with teacher
forcing; the loss is the mean negative log-likelihood over all target
positions in the batch. Optimization is a simplified AdaFactor: factored
second moments (row/column means of G*G, rank-1 reconstruction) with linear
learning-rate warmup, no update clipping, no relative step sizes.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .corpus import Dataset, QAExample
from .metrics import corpus_bleu

N_BYTES = 256
BOS = 256
EOS = 257
SEP = 258
VOCAB_SIZE = 259

ADAFACTOR_EPS = 1e-30

# Frozen-model initialization scales. The recurrence must neither wash out
# the prompt before the target positions (pure contraction) nor drown the
# readout in noise, so the recurrent matrix is a scaled rotation: orthogonal
# for norm preservation, gain slightly above 1 so tanh admits stable
# nonzero fixed points the prompt can select between.
EMBED_STD = 0.1          # small inputs keep the recurrence near-linear
RECURRENT_GAIN = 1.2     # > 1: state persists instead of decaying to 0
RECURRENT_MIX = 0.15     # rotation speed of the orthogonal factor
OUTPUT_SCALE = 8.0       # readout sharpness; logit swing per unit of state

# Unigram prior over output tokens, used to initialize the output bias to
# log-probabilities. Without it every one of the 259 logits competes at
# equal prior odds, which a 16-dim state cannot overcome. English letter
# frequencies, most common first.
LETTER_FREQUENCY_ORDER = "etaoinshrdlcumwfgypbvkjxqz"
SPACE_PRIOR = 0.17
LETTER_PRIOR_TOP = 0.09
LETTER_PRIOR_DECAY = 0.82
DIGIT_PRIOR = 0.004
PUNCT_PRIOR = 0.002
PUNCT_BYTES = ".,;:!?'\"()-[]"
MARKER_PRIOR = 0.01      # SEP and EOS each occur once per example
PRIOR_FLOOR = 1e-6       # unseen bytes keep nonzero mass


def byte_prior() -> np.ndarray:
    """Unigram distribution over the 259 output tokens (text-like prior)."""
    p = np.full(VOCAB_SIZE, PRIOR_FLOOR)
    p[ord(" ")] = SPACE_PRIOR
    for rank, ch in enumerate(LETTER_FREQUENCY_ORDER):
        p[ord(ch)] = LETTER_PRIOR_TOP * LETTER_PRIOR_DECAY ** rank
    for ch in "0123456789":
        p[ord(ch)] = DIGIT_PRIOR
    for ch in PUNCT_BYTES:
        p[ord(ch)] = PUNCT_PRIOR
    p[SEP] = MARKER_PRIOR
    p[EOS] = MARKER_PRIOR
    return p / p.sum()


class TunerError(ValueError):
    """Raised for invalid tuner configuration or inputs."""


@dataclass(eq=False)
class ToyLM:
    """Frozen byte-level recurrent LM. Arrays are read-only after creation."""

    d: int
    h: int
    E: np.ndarray      # vocab_size x d
    W_x: np.ndarray    # h x d
    W_s: np.ndarray    # h x h
    W_o: np.ndarray    # vocab_size x h
    b_s: np.ndarray    # h
    b_o: np.ndarray    # vocab_size
    seed: int

    vocab_size: int = VOCAB_SIZE

    def __post_init__(self):
        expected = {
            "E": (self.vocab_size, self.d),
            "W_x": (self.h, self.d),
            "W_s": (self.h, self.h),
            "W_o": (self.vocab_size, self.h),
            "b_s": (self.h,),
            "b_o": (self.vocab_size,),
        }
        for name, shape in expected.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise TunerError(f"{name} has shape {arr.shape}; expected {shape}")
            arr.setflags(write=False)


def create_toy_lm(d: int = 8, h: int = 16, seed: int = 0) -> ToyLM:
    """Build a frozen model with seeded weights.

    The recurrent matrix is a gain-scaled orthogonal rotation built through
    a Cayley transform of a random skew-symmetric matrix; the output bias
    starts at the log of a text-like unigram prior. Both choices exist so a
    trained soft prompt can actually steer decoding: see the scale constants
    above for the constraint each one serves.
    """
    rng = np.random.default_rng(seed)
    E = rng.normal(0.0, EMBED_STD, (VOCAB_SIZE, d))
    W_x = rng.normal(0.0, 1.0 / math.sqrt(d), (h, d))
    M = rng.normal(0.0, 1.0 / math.sqrt(h), (h, h))
    A = (M - M.T) / 2.0
    eye = np.eye(h)
    W_s = RECURRENT_GAIN * np.linalg.solve(
        eye + RECURRENT_MIX * A, eye - RECURRENT_MIX * A
    )
    W_o = rng.normal(0.0, OUTPUT_SCALE / math.sqrt(h), (VOCAB_SIZE, h))
    return ToyLM(
        d=d,
        h=h,
        E=E,
        W_x=W_x,
        W_s=W_s,
        W_o=W_o,
        b_s=np.zeros(h),
        b_o=np.log(byte_prior()),
        seed=seed,
    )


def model_checksum(model: ToyLM) -> str:
    """SHA-256 over the raw bytes of every parameter; bit-exact identity."""
    digest = hashlib.sha256()
    for arr in (model.E, model.W_x, model.W_s, model.W_o, model.b_s, model.b_o):
        digest.update(str(arr.shape).encode())
        digest.update(np.ascontiguousarray(arr).tobytes())
    return digest.hexdigest()


@dataclass(frozen=True)
class SoftPrompt:
    """The trainable prompt: m rows of width d, fed before any token."""

    P: np.ndarray
    m: int

    def __post_init__(self):
        if self.m < 1:
            raise TunerError("prompt length m must be >= 1")
        if self.P.ndim != 2 or self.P.shape[0] != self.m:
            raise TunerError(
                f"P has shape {self.P.shape}; expected ({self.m}, d)"
            )
        if not np.isfinite(self.P).all():
            raise TunerError("prompt entries must be finite")

    @property
    def d(self) -> int:
        return int(self.P.shape[1])


@dataclass(frozen=True)
class TuneConfig:
    m: int
    learning_rate: float = 0.3
    warmup_steps: int = 200
    batch_size: int = 16
    max_steps: int = 1000
    eval_every: int = 50
    early_stop_metric: str = "bleu"
    seed: int = 0

    def __post_init__(self):
        for name in ("m", "warmup_steps", "batch_size", "max_steps", "eval_every"):
            if getattr(self, name) < 1:
                raise TunerError(f"{name} must be >= 1")
        if self.learning_rate <= 0:
            raise TunerError("learning_rate must be > 0")
        if self.early_stop_metric not in ("bleu", "dev_loss"):
            raise TunerError(
                f"early_stop_metric must be 'bleu' or 'dev_loss', "
                f"got {self.early_stop_metric!r}"
            )


@dataclass(frozen=True)
class EvalRecord:
    step: int
    train_loss: float
    dev_metric: float


@dataclass(frozen=True)
class TuneTrace:
    records: Tuple[EvalRecord, ...]
    best_step: int
    best_prompt: SoftPrompt
    metric: str
    initial_train_loss: float
    final_train_loss: float


def encode_context(context: str, language: str) -> Tuple[int, ...]:
    """Token ids for the conditioning side: "[l]" bytes, BOS, context bytes."""
    if not context:
        raise TunerError("context must be non-empty")
    if not language:
        raise TunerError("language must be non-empty")
    prefix = f"[{language}]".encode("utf-8")
    return tuple(prefix) + (BOS,) + tuple(context.encode("utf-8"))


def encode_example(example: QAExample) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    """(input_tokens, target_tokens) for one QA example.

    input = bytes("[l]") + BOS + bytes(context)
    target = bytes(answer) + SEP + bytes(question) + EOS
    """
    inp = encode_context(example.context, example.language)
    tgt = (
        tuple(example.answer.encode("utf-8"))
        + (SEP,)
        + tuple(example.question.encode("utf-8"))
        + (EOS,)
    )
    return inp, tgt


def decode_bytes(tokens: Sequence[int]) -> str:
    """UTF-8 decode of the byte-valued tokens, skipping marker ids."""
    return bytes(t for t in tokens if 0 <= t < N_BYTES).decode(
        "utf-8", errors="replace"
    )


def split_decoded(tokens: Sequence[int]) -> Optional[Tuple[str, str]]:
    """Split a decoded target sequence at the first SEP into (answer, question).

    Returns None when no SEP is present (the generation never produced the
    answer/question boundary).
    """
    toks = list(tokens)
    if SEP not in toks:
        return None
    at = toks.index(SEP)
    return decode_bytes(toks[:at]), decode_bytes(toks[at + 1 :])


def _batch_nll(
    model: ToyLM,
    prompt: SoftPrompt,
    batch: Sequence[Tuple[Tuple[int, ...], Tuple[int, ...]]],
    need_grad: bool,
) -> Tuple[float, int, Optional[np.ndarray]]:
    """Teacher-forced NLL sum, target-position count, and optionally dP.

    Sequences are padded to the batch maximum; padded positions use zero
    input vectors and are excluded from the loss mask, and because every
    loss position of an example precedes its padded tail, padding cannot
    leak into either the loss or the gradient.
    """
    if not batch:
        raise TunerError("batch must be non-empty")
    m = prompt.m
    B = len(batch)
    body_lens = [len(inp) + len(tgt) - 1 for inp, tgt in batch]
    T = m + max(body_lens)

    X = np.zeros((B, T, model.d))
    X[:, :m, :] = prompt.P
    loss_mask = np.zeros((B, T), dtype=bool)
    targets = np.zeros((B, T), dtype=np.int64)
    for b, (inp, tgt) in enumerate(batch):
        body = list(inp) + list(tgt[:-1])
        X[b, m : m + len(body), :] = model.E[body]
        base = m + len(inp) - 1
        for j, y in enumerate(tgt):
            loss_mask[b, base + j] = True
            targets[b, base + j] = y

    S = np.empty((B, T, model.h))
    prev = np.zeros((B, model.h))
    for t in range(T):
        prev = np.tanh(X[:, t, :] @ model.W_x.T + prev @ model.W_s.T + model.b_s)
        S[:, t, :] = prev

    flat_states = S[loss_mask]
    flat_targets = targets[loss_mask]
    n = flat_targets.shape[0]
    logits = flat_states @ model.W_o.T + model.b_o
    shifted = logits - logits.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1)) + logits.max(axis=1)
    nll_sum = float((logsumexp - logits[np.arange(n), flat_targets]).sum())

    if not need_grad:
        return nll_sum, n, None

    probs = np.exp(shifted)
    probs /= probs.sum(axis=1, keepdims=True)
    dlogits = probs
    dlogits[np.arange(n), flat_targets] -= 1.0
    dlogits /= n

    dS = np.zeros((B, T, model.h))
    dS[loss_mask] = dlogits @ model.W_o

    dP = np.zeros((m, model.d))
    carry = np.zeros((B, model.h))
    for t in range(T - 1, -1, -1):
        dz = (dS[:, t, :] + carry) * (1.0 - S[:, t, :] ** 2)
        if t < m:
            dP[t] = (dz @ model.W_x).sum(axis=0)
        carry = dz @ model.W_s
    return nll_sum, n, dP


def loss(
    model: ToyLM,
    prompt: SoftPrompt,
    batch: Sequence[Tuple[Tuple[int, ...], Tuple[int, ...]]],
) -> float:
    """Mean NLL over all target positions in the batch."""
    nll_sum, n, _ = _batch_nll(model, prompt, batch, need_grad=False)
    return nll_sum / n


def grad(
    model: ToyLM,
    prompt: SoftPrompt,
    batch: Sequence[Tuple[Tuple[int, ...], Tuple[int, ...]]],
) -> np.ndarray:
    """Exact gradient of loss() with respect to the prompt matrix."""
    _, _, dP = _batch_nll(model, prompt, batch, need_grad=True)
    return dP


@dataclass
class AdafactorState:
    """Factored second-moment accumulators: R over rows, C over columns."""

    R: np.ndarray
    C: np.ndarray

    @classmethod
    def zeros(cls, m: int, d: int) -> "AdafactorState":
        return cls(R=np.zeros(m), C=np.zeros(d))


def warmup_lr(learning_rate: float, t: int, warmup_steps: int) -> float:
    """Linear warmup to learning_rate over warmup_steps, then constant."""
    return learning_rate * min(1.0, t / warmup_steps)


def optimizer_step(
    state: AdafactorState,
    prompt: SoftPrompt,
    G: np.ndarray,
    t: int,
    config: TuneConfig,
) -> Tuple[SoftPrompt, AdafactorState]:
    """One simplified-AdaFactor update at step index t (1-based).

    decay = 1 - t**-0.8; the second moment is reconstructed rank-1 from the
    running row and column means of G*G, normalized by mean(R).
    """
    if t < 1:
        raise TunerError("step index t must be >= 1")
    if G.shape != prompt.P.shape:
        raise TunerError(f"gradient shape {G.shape} != prompt shape {prompt.P.shape}")
    beta = 1.0 - t ** -0.8
    gsq = G * G
    R = beta * state.R + (1.0 - beta) * gsq.mean(axis=1)
    C = beta * state.C + (1.0 - beta) * gsq.mean(axis=0)
    new_state = AdafactorState(R=R, C=C)
    mean_r = R.mean()
    if mean_r == 0.0:
        # All accumulated gradient mass is zero, which forces G == 0 here;
        # the update would be 0/sqrt(eps) anyway, so skip the division.
        return prompt, new_state
    v_hat = np.outer(R, C) / mean_r
    lr_t = warmup_lr(config.learning_rate, t, config.warmup_steps)
    new_p = prompt.P - lr_t * G / np.sqrt(v_hat + ADAFACTOR_EPS)
    return SoftPrompt(P=new_p, m=prompt.m), new_state


def init_prompt(m: int, d: int, seed: int) -> SoftPrompt:
    """Seeded uniform(-0.5, 0.5) initialization."""
    rng = np.random.default_rng(seed)
    return SoftPrompt(P=rng.uniform(-0.5, 0.5, (m, d)), m=m)


def greedy_decode(
    model: ToyLM,
    prompt: SoftPrompt,
    context_tokens: Sequence[int],
    max_len: int,
) -> Tuple[int, ...]:
    """Greedy continuation after prompt rows + context embeddings.

    Emits argmax tokens (np.argmax: ties resolve to the lowest id) until EOS
    or max_len tokens; EOS itself is not part of the output.
    """
    if max_len < 0:
        raise TunerError("max_len must be >= 0")
    s = np.zeros(model.h)
    for row in prompt.P:
        s = np.tanh(model.W_x @ row + model.W_s @ s + model.b_s)
    for tok in context_tokens:
        s = np.tanh(model.W_x @ model.E[tok] + model.W_s @ s + model.b_s)
    out: List[int] = []
    for _ in range(max_len):
        logits = model.W_o @ s + model.b_o
        nxt = int(np.argmax(logits))
        if nxt == EOS:
            break
        out.append(nxt)
        s = np.tanh(model.W_x @ model.E[nxt] + model.W_s @ s + model.b_s)
    return tuple(out)


def _dataset_language(dataset: Dataset, role: str) -> str:
    languages = {ex.language for ex in dataset.examples}
    if len(languages) != 1:
        raise TunerError(
            f"{role} dataset must be monolingual; found {sorted(languages)}"
        )
    return next(iter(languages))


def _full_loss(
    model: ToyLM,
    prompt: SoftPrompt,
    encoded: Sequence[Tuple[Tuple[int, ...], Tuple[int, ...]]],
    chunk: int = 64,
) -> float:
    total = 0.0
    count = 0
    for i in range(0, len(encoded), chunk):
        nll, n, _ = _batch_nll(model, prompt, encoded[i : i + chunk], need_grad=False)
        total += nll
        count += n
    return total / count


def _dev_bleu(
    model: ToyLM,
    prompt: SoftPrompt,
    dev: Dataset,
    dev_encoded: Sequence[Tuple[Tuple[int, ...], Tuple[int, ...]]],
) -> float:
    """Corpus BLEU of greedily decoded question bytes against dev questions."""
    max_len = max(len(tgt) for _, tgt in dev_encoded) + 8
    hypotheses = []
    references = []
    for ex, (inp, _) in zip(dev.examples, dev_encoded):
        decoded = greedy_decode(model, prompt, inp, max_len)
        if SEP in decoded:
            question_tokens = list(decoded[decoded.index(SEP) + 1 :])
        else:
            question_tokens = []
        hypotheses.append([t for t in question_tokens if t < N_BYTES])
        references.append(list(ex.question.encode("utf-8")))
    return corpus_bleu(hypotheses, references).score


def tune(
    model: ToyLM,
    train: Dataset,
    dev: Dataset,
    config: TuneConfig,
) -> TuneTrace:
    """Tune one soft prompt on a monolingual corpus with early-stop tracking.

    The prompt starts from a seeded uniform(-0.5, 0.5) draw; minibatches
    follow a seeded per-epoch shuffle; the dev metric is computed every
    eval_every steps and at the final step; the returned best prompt is the
    one from the eval with the best dev metric (highest bleu / lowest
    dev_loss, earliest step on ties). Recorded train_loss values are means
    of the batch losses since the previous eval.
    """
    if not train.examples:
        raise TunerError("train dataset must be non-empty")
    if not dev.examples:
        raise TunerError("dev dataset must be non-empty")
    train_lang = _dataset_language(train, "train")
    dev_lang = _dataset_language(dev, "dev")
    if train_lang != dev_lang:
        raise TunerError(
            f"train language {train_lang!r} != dev language {dev_lang!r}"
        )

    train_encoded = [encode_example(ex) for ex in train.examples]
    dev_encoded = [encode_example(ex) for ex in dev.examples]

    rng = np.random.default_rng(config.seed)
    prompt = SoftPrompt(
        P=rng.uniform(-0.5, 0.5, (config.m, model.d)), m=config.m
    )
    state = AdafactorState.zeros(config.m, model.d)
    initial_train_loss = _full_loss(model, prompt, train_encoded)

    def dev_metric(p: SoftPrompt) -> float:
        if config.early_stop_metric == "bleu":
            return _dev_bleu(model, p, dev, dev_encoded)
        return _full_loss(model, p, dev_encoded)

    records: List[EvalRecord] = []
    best_idx = -1
    best_prompt = prompt
    window: List[float] = []
    order: List[int] = []

    for t in range(1, config.max_steps + 1):
        while len(order) < config.batch_size:
            perm = rng.permutation(len(train_encoded))
            order.extend(int(i) for i in perm)
        batch_idx, order = order[: config.batch_size], order[config.batch_size :]
        batch = [train_encoded[i] for i in batch_idx]
        nll, n, dP = _batch_nll(model, prompt, batch, need_grad=True)
        window.append(nll / n)
        prompt, state = optimizer_step(state, prompt, dP, t, config)

        if t % config.eval_every == 0 or t == config.max_steps:
            metric_value = dev_metric(prompt)
            records.append(
                EvalRecord(
                    step=t,
                    train_loss=sum(window) / len(window),
                    dev_metric=metric_value,
                )
            )
            window = []
            better = (
                best_idx == -1
                or (
                    config.early_stop_metric == "bleu"
                    and metric_value > records[best_idx].dev_metric
                )
                or (
                    config.early_stop_metric == "dev_loss"
                    and metric_value < records[best_idx].dev_metric
                )
            )
            if better:
                best_idx = len(records) - 1
                best_prompt = SoftPrompt(P=prompt.P.copy(), m=prompt.m)

    final_train_loss = _full_loss(model, prompt, train_encoded)
    return TuneTrace(
        records=tuple(records),
        best_step=records[best_idx].step,
        best_prompt=best_prompt,
        metric=config.early_stop_metric,
        initial_train_loss=initial_train_loss,
        final_train_loss=final_train_loss,
    )


def save_prompt(
    prompt: SoftPrompt,
    path: Union[str, Path],
    seed: int,
    config_hash: str,
) -> None:
    """Write a one-line JSON header then the row-major float64 payload."""
    header = json.dumps(
        {"m": prompt.m, "d": prompt.d, "seed": seed, "config_hash": config_hash},
        sort_keys=True,
    )
    with Path(path).open("wb") as fh:
        fh.write(header.encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(prompt.P, dtype="<f8").tobytes())


def load_prompt(path: Union[str, Path]) -> Tuple[SoftPrompt, Dict]:
    """Read a prompt written by save_prompt; returns (prompt, header)."""
    blob = Path(path).read_bytes()
    nl = blob.index(b"\n")
    header = json.loads(blob[:nl].decode("utf-8"))
    m, d = int(header["m"]), int(header["d"])
    payload = blob[nl + 1 :]
    expected = m * d * 8
    if len(payload) != expected:
        raise TunerError(
            f"prompt payload is {len(payload)} bytes; expected {expected}"
        )
    P = np.frombuffer(payload, dtype="<f8").reshape(m, d).copy()
    return SoftPrompt(P=P, m=m), header
