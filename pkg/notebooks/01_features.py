"""MFCC features from a waveform.

Build a two-tone test signal, extract cepstra with deltas and look at
the pieces of the recipe along the way.
"""

# %%
import numpy as np

from hybridsv.corpus import AudioSignal
from hybridsv.features import FrameConfig, delta, extract, hz_to_mel, mel_filterbank

# %% [markdown]
# The mel scale is roughly linear below 1 kHz and logarithmic above.

# %%
for f in (0, 250, 700, 1000, 4000):
    print(f"{f:>5} Hz -> {hz_to_mel(f):8.2f} mel")

# %%
sr = 16000
t = np.arange(sr) / sr
x = 0.5 * np.sin(2 * np.pi * 440 * t) + 0.3 * np.sin(2 * np.pi * 1800 * t)
cfg = FrameConfig()
feats = extract(AudioSignal(x, sr), cfg, "tone")
print("frames x dims:", feats.values.shape, "expected dim", cfg.dim)

# %% [markdown]
# Filters are triangles on the mel axis; each row sums to a positive area.

# %%
fb = mel_filterbank(cfg.n_mel_filters, cfg.n_fft(sr), sr)
print("filterbank", fb.shape, "peak bins", fb.argmax(axis=1)[:6], "...")

# %% [markdown]
# Deltas are a regression slope: zero on a constant track, one on a unit ramp.

# %%
ramp = np.arange(10.0)[:, None]
print("ramp deltas:", delta(ramp, N=2).ravel())
