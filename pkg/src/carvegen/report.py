"""Human-inspectable run artifacts: reconstruction panels and the text report.

A reconstruction is presented as five sibling byte buffers written as .bmp
files. Each panel is the full file length so every one renders at the original
geometry; regions a panel does not own are zero-filled. Pixel payload zeros
show up as black, and with bottom-up row order the predicted region occupies
the visually upper rows.
"""
from __future__ import annotations

from pathlib import Path

from .bmp import HEADER_SIZE
from .errors import LengthMismatchError
from .fragments import FragmentRecord

PANEL_NAMES = ("input", "predicted", "real", "reconstructed", "original")


def reconstruction_panels(
    record: FragmentRecord, predicted: bytes
) -> dict[str, bytes]:
    """Build the five panels: input, predicted, real, reconstructed, original.

    The input panel is the retained prefix with everything after the cut
    zeroed. The predicted and real panels keep the header so they stay
    renderable, zero the retained payload region, and carry only their own
    continuation bytes. Reconstructed is the honest concatenation and original
    is the untouched source file.
    """
    if len(predicted) != len(record.real_fragment):
        raise LengthMismatchError(
            f"predicted fragment is {len(predicted)} bytes, "
            f"expected {len(record.real_fragment)}"
        )
    full = record.full_bytes
    cut = record.cut
    total = len(full)
    keep = min(cut, HEADER_SIZE)

    input_panel = full[:cut] + bytes(total - cut)
    predicted_panel = full[:keep] + bytes(cut - keep) + predicted
    real_panel = full[:keep] + bytes(cut - keep) + record.real_fragment
    reconstructed = full[:cut] + predicted
    return {
        "input": input_panel,
        "predicted": predicted_panel,
        "real": real_panel,
        "reconstructed": reconstructed,
        "original": full,
    }


def write_reconstruction(
    record: FragmentRecord, predicted: bytes, directory: str | Path
) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    panels = reconstruction_panels(record, predicted)
    written = []
    for name in PANEL_NAMES:
        path = directory / f"{record.source_id}_{name}.bmp"
        path.write_bytes(panels[name])
        written.append(path)
    return written


def render_run_report(
    *,
    config_echo: str,
    dataset_lines: list[str],
    summary_text: str | None,
    tally_line: str | None,
    problems: list[str],
) -> str:
    """Assemble the deterministic plain-text run report."""
    sections = []

    sections.append("== run configuration ==\n" + config_echo.rstrip() + "\n")

    if dataset_lines:
        sections.append("== dataset ==\n" + "\n".join(dataset_lines) + "\n")

    if summary_text is not None:
        sections.append("== similarity summary ==\n" + summary_text.rstrip() + "\n")

    if tally_line is not None:
        sections.append("== matching ==\n" + tally_line.rstrip() + "\n")

    if problems:
        sections.append("== problems ==\n" + "\n".join(problems) + "\n")
    else:
        sections.append("== problems ==\nnone\n")

    return "\n".join(sections)
