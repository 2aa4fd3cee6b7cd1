"""The 88-entry frame feature table: fixed order, versioned.

Low-level descriptors are measured over 25 ms sub-windows (10 ms hop) inside
each 1 s frame; the table lists the statistical functionals applied to each
descriptor trajectory. Descriptors marked voiced-only are summarized over
voiced sub-windows and imputed as 0 when a frame has none; unvoiced-only
summaries mirror that for unvoiced sub-windows.

Persisted feature files and models record FEATURE_TABLE_VERSION and loaders
refuse a mismatch, so the order below must never be reshuffled silently; add
a version bump instead.
"""

FEATURE_TABLE_VERSION = 1

# (descriptor, functionals, region) triplets; region:
#   "voiced"   - voiced sub-windows only
#   "unvoiced" - unvoiced sub-windows only
#   "all"      - every sub-window
#   "frame"    - scalar computed once per frame
_EXTENDED = ["mean", "cv", "p20", "p50", "p80", "p20_80_range",
             "rising_slope_mean", "rising_slope_std",
             "falling_slope_mean", "falling_slope_std"]
_MEAN_CV = ["mean", "cv"]

TABLE = [
    ("f0_semitone", _EXTENDED, "voiced"),
    ("loudness", _EXTENDED, "all"),
    ("spectral_flux", _MEAN_CV, "all"),
    ("mfcc1", _MEAN_CV, "all"),
    ("mfcc2", _MEAN_CV, "all"),
    ("mfcc3", _MEAN_CV, "all"),
    ("mfcc4", _MEAN_CV, "all"),
    ("jitter_local", _MEAN_CV, "voiced"),
    ("shimmer_db", _MEAN_CV, "voiced"),
    ("hnr_db", _MEAN_CV, "voiced"),
    ("h1_h2_db", _MEAN_CV, "voiced"),
    ("h1_a3_db", _MEAN_CV, "voiced"),
    ("f1_freq", _MEAN_CV, "voiced"),
    ("f1_bw", _MEAN_CV, "voiced"),
    ("f1_amp_rel_f0", _MEAN_CV, "voiced"),
    ("f2_freq", _MEAN_CV, "voiced"),
    ("f2_bw", _MEAN_CV, "voiced"),
    ("f2_amp_rel_f0", _MEAN_CV, "voiced"),
    ("f3_freq", _MEAN_CV, "voiced"),
    ("f3_bw", _MEAN_CV, "voiced"),
    ("f3_amp_rel_f0", _MEAN_CV, "voiced"),
    ("alpha_ratio_voiced", _MEAN_CV, "voiced"),
    ("hammarberg_voiced", _MEAN_CV, "voiced"),
    ("slope_0_500_voiced", _MEAN_CV, "voiced"),
    ("slope_500_1500_voiced", _MEAN_CV, "voiced"),
    ("spectral_flux_voiced", _MEAN_CV, "voiced"),
    ("mfcc1_voiced", _MEAN_CV, "voiced"),
    ("mfcc2_voiced", _MEAN_CV, "voiced"),
    ("mfcc3_voiced", _MEAN_CV, "voiced"),
    ("mfcc4_voiced", _MEAN_CV, "voiced"),
    ("alpha_ratio_unvoiced", ["mean"], "unvoiced"),
    ("hammarberg_unvoiced", ["mean"], "unvoiced"),
    ("slope_0_500_unvoiced", ["mean"], "unvoiced"),
    ("slope_500_1500_unvoiced", ["mean"], "unvoiced"),
    ("spectral_flux_unvoiced", ["mean"], "unvoiced"),
    ("loudness_peaks_per_sec", ["value"], "frame"),
    ("voiced_segments_per_sec", ["value"], "frame"),
    ("voiced_segment_len_mean_s", ["value"], "frame"),
    ("voiced_segment_len_std_s", ["value"], "frame"),
    ("unvoiced_segment_len_mean_s", ["value"], "frame"),
    ("unvoiced_segment_len_std_s", ["value"], "frame"),
    ("equivalent_sound_level_db", ["value"], "frame"),
]

FEATURE_NAMES: list[str] = []
for _desc, _funcs, _region in TABLE:
    for _f in _funcs:
        FEATURE_NAMES.append(_desc if _f == "value" else f"{_desc}_{_f}")

FEATURE_COUNT = len(FEATURE_NAMES)
assert FEATURE_COUNT == 88, f"feature table drifted: {FEATURE_COUNT} entries"
