from pathlib import Path

import pytest

from medlang.corpus import extract_units, parse_case_metadata, parse_transcript
from medlang.measure import CausalRecord, Domains

FIXTURE_DIR = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def paired_transcript_path() -> Path:
    return FIXTURE_DIR / "paired_cases.ndjson"


@pytest.fixture(scope="session")
def paired_meta_path() -> Path:
    return FIXTURE_DIR / "paired_cases_meta.ndjson"


@pytest.fixture(scope="session")
def paired_utterances(paired_transcript_path):
    with open(paired_transcript_path, "rb") as fh:
        return parse_transcript(fh)


@pytest.fixture(scope="session")
def paired_meta(paired_meta_path):
    with open(paired_meta_path, "rb") as fh:
        return parse_case_metadata(fh)


@pytest.fixture
def paired_units(paired_utterances, paired_meta):
    return extract_units(paired_utterances, paired_meta)


@pytest.fixture
def paired_case_utterances(paired_utterances):
    by_case = {}
    for utt in paired_utterances:
        by_case.setdefault(utt.case_id, []).append(utt)
    return by_case


def simple_domains(n_x_levels: int = 2, mediators=(("hedging", 2),)) -> Domains:
    return Domains(
        confounders=(("x0", tuple(str(i) for i in range(n_x_levels))),),
        mediators=tuple(mediators),
    )


def records_from_arrays(t, x0, m, y, fold, mediator="hedging") -> list[CausalRecord]:
    """Build records from parallel level sequences; x levels are strings."""
    return [
        CausalRecord(
            unit_id=f"u{i:06d}",
            t=int(ti),
            x={"x0": str(int(xi))},
            m={mediator: int(mi)},
            y=int(yi),
            fold=int(fi),
        )
        for i, (ti, xi, mi, yi, fi) in enumerate(zip(t, x0, m, y, fold))
    ]
