"""Published classification scores, kept for side-by-side comparison only.

Keys are state names; values map metric name to the reported number.
"""

SLEEP_BOSD = {
    "wake": {"precision": 0.94, "recall": 0.93, "f1": 0.93},
    "rem": {"precision": 0.90, "recall": 0.91, "f1": 0.91},
    "nrem": {"precision": 0.81, "recall": 0.87, "f1": 0.84},
}
SLEEP_BOSD_AVERAGE = {"precision": 0.91, "recall": 0.91, "f1": 0.91}

ECG_BOSD = {
    "s0": {"precision": 0.99, "recall": 0.81, "f1": 0.89},
    "s1": {"precision": 0.84, "recall": 0.99, "f1": 0.91},
}

FIXTURES = {"sleep": SLEEP_BOSD, "ecg": ECG_BOSD}
