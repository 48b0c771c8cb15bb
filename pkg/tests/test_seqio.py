"""Parser tests: FASTA, the Stockholm subset, and residue validation."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rnadot.seqio import (
    Family,
    ParseError,
    RnaSequence,
    group_by_family,
    normalize_residues,
    parse_fasta,
    parse_stockholm,
)


class TestNormalizeResidues:
    def test_case_fold_and_t_to_u(self):
        assert normalize_residues("acgt") == "ACGU"

    def test_identity_on_clean_input(self):
        assert normalize_residues("GAAAC") == "GAAAC"

    def test_rejects_ambiguity_code_with_position(self):
        with pytest.raises(ParseError, match=r"'N'.*position 3"):
            normalize_residues("GANAC")

    @pytest.mark.parametrize("ch", ["N", "R", "Y", "X", "-", " "])
    def test_rejects_non_alphabet(self, ch):
        with pytest.raises(ParseError):
            normalize_residues("GA" + ch + "AC")


class TestRnaSequence:
    def test_length_property(self):
        s = RnaSequence(id="s1", family="F", residues="GAAAC")
        assert s.length == 5
        assert s.key == ("F", "s1")

    def test_rejects_invalid_residues(self):
        with pytest.raises(ParseError):
            RnaSequence(id="s1", family="F", residues="GAXAC")

    def test_rejects_empty_id_and_body(self):
        with pytest.raises(ParseError):
            RnaSequence(id="", family="F", residues="GAAAC")
        with pytest.raises(ParseError):
            RnaSequence(id="s1", family="F", residues="")


class TestFamily:
    def test_rejects_member_of_other_family(self):
        s = RnaSequence(id="s1", family="OTHER", residues="GAAAC")
        with pytest.raises(ValueError, match="carries family"):
            Family(accession="F", members=[s])

    def test_rejects_duplicate_ids(self):
        a = RnaSequence(id="s1", family="F", residues="GAAAC")
        b = RnaSequence(id="s1", family="F", residues="AAAAA")
        with pytest.raises(ValueError, match="duplicate"):
            Family(accession="F", members=[a, b])


class TestParseFasta:
    def test_single_record(self):
        seqs = parse_fasta(">FAM1/s1\nGAAAC\n")
        assert seqs == [RnaSequence(id="s1", family="FAM1", residues="GAAAC")]

    def test_multiline_body_and_case(self):
        seqs = parse_fasta(">F/a\nGA\nAAC\n>F/b\nacgu\n")
        assert [s.residues for s in seqs] == ["GAAAC", "ACGU"]

    def test_bad_residue_names_record_and_character(self):
        with pytest.raises(ParseError, match=r"'X'"):
            parse_fasta(">F/a\nGAXAC\n")

    def test_header_without_family_needs_default(self):
        with pytest.raises(ParseError):
            parse_fasta(">justid\nGAAAC\n")
        seqs = parse_fasta(">justid\nGAAAC\n", default_family="FAMX")
        assert seqs[0].family == "FAMX" and seqs[0].id == "justid"

    def test_empty_body_is_error(self):
        with pytest.raises(ParseError):
            parse_fasta(">F/a\n>F/b\nGAAAC\n")

    def test_crlf_accepted(self):
        seqs = parse_fasta(">F/a\r\nGAAAC\r\n")
        assert seqs[0].residues == "GAAAC"

    def test_order_preserved(self):
        seqs = parse_fasta(">F/b\nGG\n>F/a\nCC\n")
        assert [s.id for s in seqs] == ["b", "a"]


STOCKHOLM_TWO_BLOCKS = """\
# STOCKHOLM 1.0
#=GF AC RF00005
s1 GA--AAC.
s2 GAAA~AC
//
# STOCKHOLM 1.0
#=GF AC RF00006
t1 ACGU
//
"""


class TestParseStockholm:
    def test_gap_stripping(self):
        fams = parse_stockholm("# STOCKHOLM 1.0\ns1 GA--AAC.\n//\n",
                               default_accession="F")
        assert fams[0].members[0].residues == "GAAAC"

    def test_accession_from_markup(self):
        fams = parse_stockholm(STOCKHOLM_TWO_BLOCKS)
        assert [f.accession for f in fams] == ["RF00005", "RF00006"]

    def test_two_blocks_make_two_families(self):
        fams = parse_stockholm(STOCKHOLM_TWO_BLOCKS)
        assert len(fams) == 2
        assert [len(f.members) for f in fams] == [2, 1]

    def test_missing_magic(self):
        with pytest.raises(ParseError, match="STOCKHOLM"):
            parse_stockholm("s1 GAAAC\n//\n")

    def test_duplicate_row_names(self):
        text = "# STOCKHOLM 1.0\ns1 GAAAC\ns1 GAAAC\n//\n"
        with pytest.raises(ParseError, match="duplicate"):
            parse_stockholm(text, default_accession="F")

    def test_unterminated_block(self):
        with pytest.raises(ParseError, match="//"):
            parse_stockholm("# STOCKHOLM 1.0\ns1 GAAAC\n")

    def test_block_without_accession_or_default(self):
        with pytest.raises(ParseError, match="accession"):
            parse_stockholm("# STOCKHOLM 1.0\ns1 GAAAC\n//\n")


class TestGroupByFamily:
    def test_groups_and_sorts(self):
        seqs = parse_fasta(">B/x\nGG\n>A/y\nCC\n>B/z\nAA\n")
        fams = group_by_family(seqs)
        assert [f.accession for f in fams] == ["A", "B"]
        assert [s.id for s in fams[1].members] == ["x", "z"]


# hypothesis fuzz: any byte input either parses cleanly or raises ParseError;
# no invalid sequence object ever escapes

@given(st.binary(max_size=300))
@settings(max_examples=200, deadline=None)
def test_fasta_fuzz_parses_or_rejects(data):
    try:
        seqs = parse_fasta(data, default_family="F")
    except ParseError:
        return
    for s in seqs:
        assert set(s.residues) <= set("ACGU")
        assert s.length >= 1


@given(st.binary(max_size=300))
@settings(max_examples=200, deadline=None)
def test_stockholm_fuzz_parses_or_rejects(data):
    try:
        fams = parse_stockholm(data, default_accession="F")
    except ParseError:
        return
    for fam in fams:
        for s in fam.members:
            assert set(s.residues) <= set("ACGU")


@given(
    residues=st.text(alphabet="ACGU", min_size=1, max_size=40),
    gap_positions=st.lists(st.integers(0, 60), max_size=20),
    gap_char=st.sampled_from(".-~"),
)
@settings(max_examples=100, deadline=None)
def test_degapping_preserves_residue_order(residues, gap_positions, gap_char):
    chars = list(residues)
    for pos in sorted(gap_positions, reverse=True):
        chars.insert(min(pos, len(chars)), gap_char)
    text = f"# STOCKHOLM 1.0\nrow {''.join(chars)}\n//\n"
    fams = parse_stockholm(text, default_accession="F")
    assert fams[0].members[0].residues == residues
