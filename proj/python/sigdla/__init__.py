"""Python bindings for the SigDLA accelerator simulator."""

from _sigdla import (
    assemble,
    disassemble,
    count_mult_adds,
    run_workload,
    compare_configs,
    fir_oracle,
    golden_fft_fixed,
    __version__,
)

__all__ = [
    "assemble",
    "disassemble",
    "count_mult_adds",
    "run_workload",
    "compare_configs",
    "fir_oracle",
    "golden_fft_fixed",
    "__version__",
]
