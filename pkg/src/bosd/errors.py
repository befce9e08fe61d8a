class UnderflowError(FloatingPointError):
    """Every hypothesis of a filter step has zero probability."""

    def __init__(self, step: int, detail: str = ""):
        self.step = step
        msg = f"total posterior mass underflowed at step {step}"
        super().__init__(f"{msg}: {detail}" if detail else msg)
