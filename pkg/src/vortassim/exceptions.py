class ValidationError(ValueError):
    """Input violates a documented precondition."""


class NumericalError(ArithmeticError):
    """A linear solve, eigen-solve or iteration failed."""

    def __init__(self, message, *, step=None, dt=None):
        self.reason = message
        ctx = []
        if step is not None:
            ctx.append(f"step={step}")
        if dt is not None:
            ctx.append(f"dt={dt:g}")
        if ctx:
            message = f"{message} ({', '.join(ctx)})"
        super().__init__(message)
        self.step = step
        self.dt = dt


class FilterAborted(NumericalError):
    """Raised by the filter loop; ``partial`` holds the run up to the failure."""

    def __init__(self, message, partial, *, step=None, dt=None):
        super().__init__(message, step=step, dt=dt)
        self.partial = partial
