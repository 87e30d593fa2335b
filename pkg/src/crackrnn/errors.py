"""Exception types mapped to CLI exit codes."""


class ConfigError(Exception):
    """Invalid or inconsistent experiment configuration (exit code 2)."""


class DataError(Exception):
    """Missing or schema-invalid dataset files (exit code 3)."""


class NumericalError(Exception):
    """Non-finite loss or gradients during training (exit code 4)."""

    def __init__(self, message: str, epoch: int | None = None,
                 plane_ids=None, param_norm: float | None = None):
        details = []
        if epoch is not None:
            details.append(f"epoch={epoch}")
        if plane_ids is not None:
            details.append(f"plane_ids={list(plane_ids)}")
        if param_norm is not None:
            details.append(f"param_norm={param_norm:.6g}")
        if details:
            message = f"{message} ({', '.join(details)})"
        super().__init__(message)
        self.epoch = epoch
        self.plane_ids = plane_ids
        self.param_norm = param_norm
