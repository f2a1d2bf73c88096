"""Synthetic HGCW-shaped formant data for runs without the real table.

Records follow the published per-phoneme/per-group counts exactly after null
filtering, plus a fixed number of null-bearing rows that :func:`filter_nulls`
must remove.  Steady-state means are rounded group averages of the Hillenbrand
et al. (1995) measurements; trajectories, speaker scaling and token noise are
made up.  Good enough to exercise the pipeline, not a stand-in for real data.
"""

from __future__ import annotations

import numpy as np

from .dataset import HGCW_CLASS_COUNTS, PHONEMES, FeatureRecord, SpeakerGroup

# (F0, F1, F2, F3) at steady state, Hz
_MEANS = {
    "men": {
        "iy": (138, 342, 2322, 3000), "ih": (135, 427, 2034, 2684),
        "ei": (129, 476, 2089, 2691), "eh": (127, 580, 1799, 2605),
        "ae": (123, 588, 1952, 2601), "ah": (123, 768, 1333, 2522),
        "aw": (121, 652, 997, 2538), "oa": (129, 497, 910, 2459),
        "oo": (133, 469, 1122, 2434), "uw": (143, 378, 997, 2343),
        "uh": (133, 623, 1200, 2550), "er": (130, 474, 1379, 1710),
    },
    "women": {
        "iy": (227, 437, 2761, 3372), "ih": (224, 483, 2365, 3053),
        "ei": (219, 536, 2530, 3047), "eh": (214, 731, 2058, 2979),
        "ae": (215, 669, 2349, 2972), "ah": (215, 936, 1551, 2815),
        "aw": (210, 781, 1136, 2824), "oa": (217, 555, 1035, 2828),
        "oo": (230, 519, 1225, 2827), "uw": (235, 459, 1105, 2735),
        "uh": (218, 753, 1426, 2933), "er": (217, 523, 1588, 1929),
    },
    "children": {
        "iy": (246, 452, 3081, 3702), "ih": (241, 511, 2552, 3403),
        "ei": (237, 564, 2656, 3323), "eh": (230, 749, 2267, 3310),
        "ae": (228, 717, 2501, 3289), "ah": (229, 1002, 1688, 2950),
        "aw": (225, 803, 1210, 2982), "oa": (236, 597, 1137, 2987),
        "oo": (243, 568, 1490, 3072), "uw": (249, 494, 1345, 2988),
        "uh": (236, 749, 1546, 3145), "er": (237, 586, 1719, 2143),
    },
}

# relative (F1, F2, F3) offsets from steady state at 10%, 50% and 80% of the nucleus
_DRIFT = {
    "iy": ((0.04, -0.03, -0.02), (0.00, 0.00, 0.00), (0.03, -0.02, -0.01)),
    "ih": ((-0.06, 0.00, 0.00), (0.00, 0.00, 0.00), (0.04, -0.05, -0.01)),
    "ei": ((0.08, -0.04, -0.01), (0.00, 0.00, 0.00), (-0.12, 0.08, 0.02)),
    "eh": ((-0.08, 0.02, 0.00), (0.00, 0.00, 0.00), (0.02, -0.05, 0.00)),
    "ae": ((-0.10, 0.03, 0.00), (0.00, 0.00, 0.00), (0.03, -0.06, -0.01)),
    "ah": ((-0.12, 0.04, 0.00), (0.00, 0.00, 0.00), (-0.02, 0.03, 0.00)),
    "aw": ((-0.10, 0.06, 0.00), (0.00, 0.00, 0.00), (-0.03, 0.05, 0.00)),
    "oa": ((0.05, 0.10, 0.00), (0.00, 0.00, 0.00), (-0.10, -0.08, 0.00)),
    "oo": ((-0.05, 0.08, 0.00), (0.00, 0.00, 0.00), (0.00, 0.05, 0.00)),
    "uw": ((0.00, 0.15, 0.00), (0.00, 0.00, 0.00), (0.00, -0.05, 0.00)),
    "uh": ((-0.10, 0.03, 0.00), (0.00, 0.00, 0.00), (0.00, 0.03, 0.00)),
    "er": ((0.03, -0.04, 0.08), (0.00, 0.00, 0.00), (-0.02, 0.02, -0.02)),
}

SPEAKERS_PER_GROUP = {SpeakerGroup.BOY: 29, SpeakerGroup.GIRL: 21, SpeakerGroup.MAN: 50, SpeakerGroup.WOMAN: 50}
N_NULL_RECORDS = 71  # 1668 utterances in the original corpus, 1597 usable


def synthetic_records(seed: int = 0, n_null: int = N_NULL_RECORDS, formant_noise: float = 0.05,
                      f0_noise: float = 0.08) -> list[FeatureRecord]:
    """Generate a full corpus; after null filtering, class counts equal HGCW's."""
    rng = np.random.default_rng(seed)
    groups = (SpeakerGroup.BOY, SpeakerGroup.GIRL, SpeakerGroup.MAN, SpeakerGroup.WOMAN)

    # per-speaker vocal-tract length and pitch scaling
    speaker_scale = {
        (g, s): (rng.normal(1.0, 0.05), rng.normal(1.0, 0.08))
        for g in groups
        for s in range(1, SPEAKERS_PER_GROUP[g] + 1)
    }

    records = []
    spare_slots = []
    for code in PHONEMES:
        for g, count in zip(groups, HGCW_CLASS_COUNTS[code]):
            speakers = rng.permutation(SPEAKERS_PER_GROUP[g]) + 1
            for s in speakers[:count]:
                records.append(_make_record(rng, g, int(s), code, speaker_scale[(g, int(s))],
                                            formant_noise, f0_noise))
            spare_slots.extend((g, int(s), code) for s in speakers[count:])

    pick = rng.choice(len(spare_slots), size=min(n_null, len(spare_slots)), replace=False)
    for i in sorted(pick):
        g, s, code = spare_slots[i]
        rec = _make_record(rng, g, s, code, speaker_scale[(g, s)], formant_noise, f0_noise)
        values = list(rec.formants)
        f0 = rec.f0
        slot = int(rng.integers(13))
        if slot == 12:
            f0 = 0.0
        else:
            values[slot] = 0.0
        records.append(FeatureRecord(rec.name, g, s, code, f0, tuple(values)))

    order = rng.permutation(len(records))
    return [records[i] for i in order]


def _make_record(rng, group, speaker, code, scale, formant_noise, f0_noise):
    f0_mean, *ss = _MEANS[group.speaker_class][code]
    if group is SpeakerGroup.BOY:
        f0_mean *= 0.98
    elif group is SpeakerGroup.GIRL:
        f0_mean *= 1.02
    tract, pitch = scale
    f0 = f0_mean * pitch * np.exp(rng.normal(0.0, f0_noise))
    ss = np.asarray(ss, dtype=float) * tract * np.exp(rng.normal(0.0, formant_noise, size=3))
    d10, d50, d80 = (np.asarray(d) for d in _DRIFT[code])
    jitter = lambda: np.exp(rng.normal(0.0, formant_noise / 2, size=3))  # noqa: E731
    at10 = ss * (1 + d10) * jitter()
    at50 = ss * (1 + d50) * jitter()
    at80 = ss * (1 + d80) * jitter()
    formants = []
    for i in range(3):
        formants.extend(round(float(v[i]), 1) for v in (at10, at50, ss, at80))
    name = f"{group.value}{speaker:02d}{code}"
    return FeatureRecord(name, group, speaker, code, round(float(f0), 1), tuple(formants))
