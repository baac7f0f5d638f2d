"""
Per-frame prompts from a label window
=====================================

Each frame of a chunk gets a sentence describing its position inside the
running action: which segment it belongs to (ordinal), how long that action
lasts in the window, and where the frame sits inside the action. The
sentences are tokenized against a vocabulary built from the class names.
"""

import numpy as np

from svtas import PromptVocab, detokenize, generate_prompts, tokenize

class_names = ["background", "cut tomato", "stir"]
labels = np.array([1, 1, 1, 0, 0, 2, 2, 2])

prompts = generate_prompts(labels, class_names)
print("one prompt per frame:")
for p in prompts:
    print("  " + p.to_string())

# The vocabulary is deterministic given the class names: control tokens,
# slot markers, digits, template words, then the classes themselves.
vocab = PromptVocab.build(class_names)
print(f"\nvocabulary size: {len(vocab)}")

ids, eos = tokenize(prompts[0], vocab, max_tokens=48)
print(f"frame 0 token ids (eos at {eos}): {ids[:eos + 1]}")
print(f"decoded back: {' '.join(detokenize(ids[:eos], vocab))}")

# Numbers are spelled digit by digit and ordinals past ten fall back to
# digits plus a suffix, so any segment length fits the fixed vocabulary.
long_window = np.concatenate([np.tile([0, 1], 6), np.full(137, 2)])
long_prompt = generate_prompts(long_window, class_names)[-1]
print(f"\nlarge ordinals and counts: {long_prompt.to_string()}")
ids, eos = tokenize(long_prompt, vocab, max_tokens=48)
print(f"tokens: {' '.join(detokenize(ids[:eos], vocab))}")
