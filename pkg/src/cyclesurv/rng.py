"""Counter-style seeding so every subject's draws are order independent.

Each ``(master_seed, trial, arm)`` triple owns a PCG64 stream. Subject ``i``
of that arm consumes uniforms ``i * width .. (i + 1) * width - 1`` of the
stream, so its values depend only on ``(master_seed, trial, arm, i)``.
"""
import numpy as np


def arm_bit_generator(master_seed, trial, arm):
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(trial), int(arm)))
    return np.random.PCG64(ss)


def arm_uniforms(master_seed, trial, arm, n, width):
    """``(n, width)`` uniforms; row ``i`` belongs to subject ``i``."""
    return np.random.Generator(arm_bit_generator(master_seed, trial, arm)).random((n, width))


def subject_uniforms(master_seed, trial, arm, subject, width):
    """Row ``subject`` of :func:`arm_uniforms`, without generating earlier rows."""
    bg = arm_bit_generator(master_seed, trial, arm)
    bg.advance(int(subject) * int(width))
    return np.random.Generator(bg).random(width)
