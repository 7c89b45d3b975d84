class InputError(ValueError):
    """Invalid argument: malformed table, unnormalized density, bad order."""


class BudgetExceededError(InputError):
    """Exact enumeration would need more configurations than the budget allows."""

    def __init__(self, required: int, budget: int):
        self.required = required
        self.budget = budget
        super().__init__(
            f"exact enumeration needs {required} configurations, budget is {budget}; "
            "use the sampler (engine='sampled') or raise the budget"
        )


class SamplerError(RuntimeError):
    """The Markov chain could not make progress (e.g. no accepted moves in burn-in)."""

    def __init__(self, message: str, acceptance_rate: float):
        self.acceptance_rate = acceptance_rate
        super().__init__(f"{message} (acceptance rate {acceptance_rate:.3g})")
