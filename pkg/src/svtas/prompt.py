"""Prompt engineering: deterministic per-frame sentences from a label window,
a closed word-level vocabulary, and a small causal transformer text encoder.

Each frame's prompt has four parts, joined by ", ":

    <ordinal>, this action lasted <num> frames in current window,
    this is frame <ord> of the action, <x0> .. <x7> <class_name>

where <ordinal> names the frame's segment index within the window (Firstly,
Secondly, ... then "<n>thly"), <num> is that segment's length inside the
window, <ord> is the frame's 1-based position inside its segment, and
<x0>..<x7> are learnable slot tokens preceding the class-name token.

Numbers are tokenized digit by digit so the vocabulary stays closed.
"""
import json
from dataclasses import dataclass

import torch
from torch import nn

from .errors import ConfigError, VocabularyError
from .labels import run_length_encode

PAD, START, END = 0, 1, 2
NUM_SLOTS = 8
SLOT_IDS = tuple(range(3, 3 + NUM_SLOTS))

ORDINAL_WORDS = ("Firstly", "Secondly", "Thirdly", "Fourthly", "Fifthly",
                 "Sixthly", "Seventhly", "Eighthly", "Ninthly", "Tenthly")
_TEMPLATE_WORDS = ("this", "action", "lasted", "frames", "in", "current",
                   "window", "is", "frame", "of", "the")
_FIXED = (("<pad>", "<start>", "<end>")
          + tuple(f"<x{i}>" for i in range(NUM_SLOTS))
          + (",",)
          + tuple(str(d) for d in range(10))
          + ("thly",)
          + _TEMPLATE_WORDS
          + ORDINAL_WORDS)


def ordinal_word(n: int) -> str:
    if n < 1:
        raise ValueError(f"ordinal must be >= 1, got {n}")
    return ORDINAL_WORDS[n - 1] if n <= len(ORDINAL_WORDS) else f"{n}thly"


def class_word(name: str) -> str:
    return "_".join(name.split())


@dataclass(frozen=True)
class FramePrompt:
    ordinal_text: str
    duration_text: str
    position_text: str
    category_slot: tuple       # (slot token ids, class token id)
    class_name: str

    def to_string(self) -> str:
        slots = " ".join(f"<x{i}>" for i in range(NUM_SLOTS))
        return ", ".join([self.ordinal_text, self.duration_text,
                          self.position_text, f"{slots} {class_word(self.class_name)}"])


class PromptVocab:
    """Closed vocabulary: control/slot tokens, digits, template and ordinal
    words, then one token per class name. Serialized as a JSON list."""

    def __init__(self, words):
        self.words = list(words)
        self.word_to_id = {w: i for i, w in enumerate(self.words)}
        if len(self.word_to_id) != len(self.words):
            raise VocabularyError("vocabulary contains duplicate words")

    def __len__(self):
        return len(self.words)

    @classmethod
    def build(cls, class_names) -> "PromptVocab":
        if not class_names:
            raise VocabularyError("cannot build a vocabulary from zero classes")
        class_words = [class_word(n) for n in class_names]
        if len(set(class_words)) != len(class_words):
            raise VocabularyError(f"class names collide after normalization: {class_words}")
        for w in class_words:
            if w in _FIXED:
                raise VocabularyError(f"class name {w!r} collides with a reserved word")
        return cls(_FIXED + tuple(class_words))

    def class_token_id(self, class_id: int) -> int:
        return len(_FIXED) + class_id

    @property
    def num_classes(self):
        return len(self.words) - len(_FIXED)

    def tokenize_word(self, word: str) -> list:
        """One word -> token ids; numbers split per digit, "<n>thly" into
        digits + the "thly" suffix token."""
        if word in self.word_to_id:
            return [self.word_to_id[word]]
        if word.isdigit():
            return [self.word_to_id[d] for d in word]
        if word.endswith("thly") and word[:-4].isdigit():
            return [self.word_to_id[d] for d in word[:-4]] + [self.word_to_id["thly"]]
        raise VocabularyError(f"word {word!r} not in vocabulary")

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.words, f, indent=0)

    @classmethod
    def load(cls, path) -> "PromptVocab":
        with open(path) as f:
            words = json.load(f)
        if not isinstance(words, list) or list(words[:len(_FIXED)]) != list(_FIXED):
            raise VocabularyError(f"{path} does not hold a compatible vocabulary")
        return cls(words)


def generate_prompts(labels, class_names) -> list:
    """Label window [k] -> one FramePrompt per frame. Pure and deterministic."""
    segments = run_length_encode(labels)
    prompts = []
    for seg_index, seg in enumerate(segments, start=1):
        if not 0 <= seg.class_id < len(class_names):
            raise ValueError(
                f"label {seg.class_id} out of range for {len(class_names)} classes")
        name = class_names[seg.class_id]
        category = (SLOT_IDS, len(_FIXED) + seg.class_id)
        for pos in range(1, len(seg) + 1):
            prompts.append(FramePrompt(
                ordinal_text=ordinal_word(seg_index),
                duration_text=f"this action lasted {len(seg)} frames in current window",
                position_text=f"this is frame {pos} of the action",
                category_slot=category,
                class_name=name,
            ))
    return prompts


def tokenize(prompt: FramePrompt, vocab: PromptVocab, max_tokens: int):
    """-> (token ids padded to max_tokens, end-of-sequence position)."""
    ids = [START]
    for part in (prompt.ordinal_text, prompt.duration_text, prompt.position_text):
        for word in part.split():
            ids.extend(vocab.tokenize_word(word))
        ids.append(vocab.word_to_id[","])
    ids.extend(prompt.category_slot[0])
    ids.append(prompt.category_slot[1])
    ids.append(END)
    if len(ids) > max_tokens:
        raise ConfigError(
            f"prompt needs {len(ids)} tokens, max_tokens is {max_tokens}")
    eos = len(ids) - 1
    ids.extend([PAD] * (max_tokens - len(ids)))
    return ids, eos


def detokenize(ids, vocab: PromptVocab) -> list:
    return [vocab.words[i] for i in ids
            if i not in (PAD, START, END)]


def tokenize_window(prompts, vocab: PromptVocab, max_tokens: int):
    """List of k prompts -> (LongTensor [k, max_tokens], LongTensor [k])."""
    token_rows, eos_rows = [], []
    for p in prompts:
        ids, eos = tokenize(p, vocab, max_tokens)
        token_rows.append(ids)
        eos_rows.append(eos)
    return torch.tensor(token_rows, dtype=torch.long), torch.tensor(eos_rows)


@dataclass
class TextEncoderConfig:
    vocab: PromptVocab
    max_tokens: int = 48
    embed_dim: int = 64
    num_layers: int = 2
    num_heads: int = 4


class _AttentionBlock(nn.Module):
    def __init__(self, dim, heads):
        super().__init__()
        self.ln1 = nn.LayerNorm(dim)
        self.attn = nn.MultiheadAttention(dim, heads, batch_first=True)
        self.ln2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(nn.Linear(dim, 4 * dim), nn.GELU(),
                                 nn.Linear(4 * dim, dim))

    def forward(self, x, mask):
        h = self.ln1(x)
        h, _ = self.attn(h, h, h, attn_mask=mask, need_weights=False)
        x = x + h
        return x + self.mlp(self.ln2(x))


class PromptTextEncoder(nn.Module):
    """Causal transformer over prompt tokens; a frame's feature is the
    layer-normalized hidden state at its end-of-sequence token.

    The slot tokens <x0>..<x7> are ordinary vocabulary entries, so their
    embedding rows are the learnable context vectors.
    """

    def __init__(self, config: TextEncoderConfig):
        super().__init__()
        self.config = config
        self.tok_emb = nn.Embedding(len(config.vocab), config.embed_dim)
        self.pos_emb = nn.Parameter(torch.zeros(config.max_tokens, config.embed_dim))
        nn.init.normal_(self.pos_emb, std=0.01)
        self.blocks = nn.ModuleList(
            _AttentionBlock(config.embed_dim, config.num_heads)
            for _ in range(config.num_layers))
        self.ln_final = nn.LayerNorm(config.embed_dim)

    def _causal_mask(self, length, dtype, device):
        mask = torch.full((length, length), float("-inf"), dtype=dtype, device=device)
        return torch.triu(mask, diagonal=1)

    def forward(self, token_ids: torch.Tensor, eos_positions: torch.Tensor):
        """token_ids [N, L], eos_positions [N] -> features [N, embed_dim]."""
        if token_ids.ndim != 2 or token_ids.shape[1] > self.config.max_tokens:
            raise ValueError(f"bad token tensor shape {tuple(token_ids.shape)}")
        x = self.tok_emb(token_ids) + self.pos_emb[:token_ids.shape[1]]
        mask = self._causal_mask(token_ids.shape[1], x.dtype, x.device)
        for block in self.blocks:
            x = block(x, mask)
        x = self.ln_final(x)
        return x[torch.arange(len(x), device=x.device), eos_positions]

    def encode_window(self, prompts) -> torch.Tensor:
        """k prompts -> [k, embed_dim]."""
        tokens, eos = tokenize_window(prompts, self.config.vocab, self.config.max_tokens)
        device = self.pos_emb.device
        return self(tokens.to(device), eos.to(device))
