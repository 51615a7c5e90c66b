import itertools

import pytest

from mfkit.errors import (
    AlreadyDecided,
    BadPage,
    CorruptLog,
    DuplicateOrigin,
    EmptyEvidence,
    InvalidTransition,
    ReportNotClaimable,
    ReportNotFound,
    ValidationError,
)
from mfkit.recordlog import encode_record
from mfkit.registry import (
    Claim,
    ClaimDecision,
    ItemCategory,
    ItemKind,
    ItemReport,
    ItemStatus,
    Origin,
    PersonReport,
    PersonReportKind,
    PersonReportStatus,
    Store,
)


def make_store(tmp_path, name="store", **kwargs):
    kwargs.setdefault("fsync", False)
    return Store(tmp_path / name, **kwargs)


def watch_report(**overrides):
    defaults = dict(
        kind=ItemKind.FOUND,
        category=ItemCategory.WATCH,
        description="black casio watch",
        location="Gate 5",
    )
    defaults.update(overrides)
    return ItemReport(**defaults)


def missing_report(**overrides):
    defaults = dict(
        kind=PersonReportKind.MISSING,
        photo_ref="a" * 64,
        location="east plaza",
    )
    defaults.update(overrides)
    return PersonReport(**defaults)


# --- open/replay ---

def test_fresh_directory_empty_store(tmp_path):
    store = make_store(tmp_path)
    assert store.items == {} and store.person_reports == {}
    assert store.list_reports() == []


def test_reports_survive_reopen(tmp_path):
    store = make_store(tmp_path)
    ids = [store.submit_item_report(watch_report(description=f"watch {i}")) for i in range(3)]
    store.close()
    reopened = make_store(tmp_path)
    assert sorted(reopened.items) == sorted(ids)


def test_corrupt_log_raises_and_recovers(tmp_path):
    store = make_store(tmp_path)
    first = store.submit_item_report(watch_report(description="one"))
    store.submit_item_report(watch_report(description="two"))
    store.submit_item_report(watch_report(description="three"))
    store.close()
    log_path = tmp_path / "store" / "registry.log"
    raw = bytearray(log_path.read_bytes())
    # flip a byte inside the second record's payload
    first_len = 0
    from mfkit.recordlog import decode_records
    records, _, _ = decode_records(bytes(raw))
    first_len = len(encode_record(records[0]))
    raw[first_len + 12] ^= 0x01
    log_path.write_bytes(bytes(raw))

    with pytest.raises(CorruptLog) as err:
        make_store(tmp_path)
    assert err.value.offset == first_len

    recovered = make_store(tmp_path, allow_truncated=True)
    assert list(recovered.items) == [first]
    assert recovered.truncated_at == first_len


def test_crash_prefix_equals_committed_prefix(tmp_path):
    store = make_store(tmp_path)
    states = [dict(store.items)]
    for i in range(5):
        store.submit_item_report(watch_report(description=f"r{i}"))
        states.append(dict(store.items))
    store.close()
    log_path = tmp_path / "store" / "registry.log"
    raw = log_path.read_bytes()
    # chop the log at every record boundary and compare to the live prefix
    from mfkit.recordlog import decode_records
    records, _, _ = decode_records(raw)
    boundary = 0
    for i, record in enumerate([None] + records):
        if record is not None:
            boundary += len(encode_record(record))
        log_path.write_bytes(raw[:boundary])
        replayed = make_store(tmp_path)
        assert replayed.items == states[i]
        replayed.close()


# --- submission ---

def test_item_round_trip(tmp_path):
    store = make_store(tmp_path)
    report = watch_report()
    rid = store.submit_item_report(report)
    stored = store.get_report(rid)
    assert stored.kind is ItemKind.FOUND
    assert stored.description == report.description
    assert stored.location == report.location
    assert stored.status is ItemStatus.OPEN
    assert stored.report_id == rid and stored.reported_at


def test_item_requires_description_or_photo(tmp_path):
    store = make_store(tmp_path)
    with pytest.raises(ValidationError):
        store.submit_item_report(watch_report(description="   ", photo_ref=None))
    # photo alone is fine
    rid = store.submit_item_report(watch_report(description="", photo_ref="f" * 64))
    assert store.get_report(rid).photo_ref == "f" * 64


def test_duplicate_origin_idempotent(tmp_path):
    store = make_store(tmp_path)
    report = watch_report(origin=Origin("kiosk-1", 1))
    first = store.submit_item_report(report)
    before = dict(store.items)
    again = store.submit_item_report(report)
    assert again == first
    assert store.items == before


def test_duplicate_origin_conflicting_payload(tmp_path):
    store = make_store(tmp_path)
    store.submit_item_report(watch_report(origin=Origin("kiosk-1", 1)))
    with pytest.raises(DuplicateOrigin):
        store.submit_item_report(
            watch_report(origin=Origin("kiosk-1", 1), description="different thing")
        )


def test_person_report_requires_photo(tmp_path):
    store = make_store(tmp_path)
    with pytest.raises(ValidationError):
        store.submit_person_report(missing_report(photo_ref=""))


def test_person_report_round_trip_and_dedup(tmp_path):
    store = make_store(tmp_path)
    report = missing_report(origin=Origin("kiosk-2", 7))
    rid = store.submit_person_report(report)
    assert store.submit_person_report(report) == rid
    stored = store.get_report(rid)
    assert stored.kind is PersonReportKind.MISSING
    assert stored.status is PersonReportStatus.OPEN
    assert stored.matched_person_id is None


def test_high_water_seq(tmp_path):
    store = make_store(tmp_path)
    for seq in (1, 2, 5):
        store.submit_item_report(watch_report(origin=Origin("k", seq), description=f"s{seq}"))
    assert store.high_water_seq("k") == 5
    assert store.high_water_seq("other") == 0


# --- claims ---

def claimed_store(tmp_path):
    store = make_store(tmp_path)
    rid = store.submit_item_report(watch_report())
    cid = store.file_claim(rid, Claim(report_id="", claimant_name="A. Claimant",
                                      evidence_text="serial number matches"))
    return store, rid, cid


def test_file_claim_sets_claim_pending(tmp_path):
    store, rid, cid = claimed_store(tmp_path)
    assert store.get_report(rid).status is ItemStatus.CLAIM_PENDING
    assert store.claims[cid].decision is ClaimDecision.PENDING


def test_second_claim_blocked_while_pending(tmp_path):
    store, rid, _ = claimed_store(tmp_path)
    with pytest.raises(ReportNotClaimable):
        store.file_claim(rid, Claim(report_id="", claimant_name="B", evidence_text="mine"))


def test_claim_requires_evidence(tmp_path):
    store = make_store(tmp_path)
    rid = store.submit_item_report(watch_report())
    with pytest.raises(EmptyEvidence):
        store.file_claim(rid, Claim(report_id="", claimant_name="B", evidence_text="  "))
    # photo evidence alone satisfies the rule
    cid = store.file_claim(rid, Claim(report_id="", claimant_name="B",
                                      evidence_text="", evidence_photo_ref="e" * 64))
    assert cid in store.claims


def test_claim_on_missing_or_person_report(tmp_path):
    store = make_store(tmp_path)
    with pytest.raises(ReportNotFound):
        store.file_claim("nope", Claim(report_id="", claimant_name="B", evidence_text="x"))
    pid = store.submit_person_report(missing_report())
    with pytest.raises(ReportNotClaimable):
        store.file_claim(pid, Claim(report_id="", claimant_name="B", evidence_text="x"))


def test_accept_resolves(tmp_path):
    store, rid, cid = claimed_store(tmp_path)
    store.resolve_claim(cid, ClaimDecision.ACCEPTED)
    assert store.get_report(rid).status is ItemStatus.RESOLVED
    assert store.claims[cid].decision is ClaimDecision.ACCEPTED
    # terminal: no further claims
    with pytest.raises(ReportNotClaimable):
        store.file_claim(rid, Claim(report_id="", claimant_name="C", evidence_text="x"))


def test_deny_reopens_and_allows_new_claim(tmp_path):
    store, rid, cid = claimed_store(tmp_path)
    store.resolve_claim(cid, ClaimDecision.DENIED)
    assert store.get_report(rid).status is ItemStatus.OPEN
    new_cid = store.file_claim(rid, Claim(report_id="", claimant_name="C",
                                          evidence_text="receipt"))
    assert new_cid != cid


def test_resolve_twice(tmp_path):
    store, _, cid = claimed_store(tmp_path)
    store.resolve_claim(cid, ClaimDecision.ACCEPTED)
    with pytest.raises(AlreadyDecided):
        store.resolve_claim(cid, ClaimDecision.DENIED)


def test_reject_only_from_open(tmp_path):
    store, rid, cid = claimed_store(tmp_path)
    with pytest.raises(InvalidTransition):
        store.reject_report(rid)  # CLAIM_PENDING cannot be rejected
    store.resolve_claim(cid, ClaimDecision.DENIED)
    store.reject_report(rid)
    assert store.get_report(rid).status is ItemStatus.REJECTED
    with pytest.raises(InvalidTransition):
        store.reject_report(rid)


# --- person report lifecycle ---

def test_person_report_status_updates(tmp_path):
    store = make_store(tmp_path)
    rid = store.submit_person_report(missing_report())
    store.attach_person_embedding(rid, {"coords": [1.0, 2.0], "model_version": 1})
    assert store.get_report(rid).embedding == {"coords": [1.0, 2.0], "model_version": 1}
    store.set_person_report_status(rid, PersonReportStatus.MATCH_PROPOSED, "person-9")
    assert store.get_report(rid).matched_person_id == "person-9"
    store.set_person_report_status(rid, PersonReportStatus.CONFIRMED)
    with pytest.raises(InvalidTransition):
        store.set_person_report_status(rid, PersonReportStatus.OPEN)
    store.set_person_report_status(rid, PersonReportStatus.CLOSED)
    assert store.get_report(rid).matched_person_id is None


def test_matched_person_iff_matched_status(tmp_path):
    store = make_store(tmp_path)
    rid = store.submit_person_report(missing_report())
    with pytest.raises(ValidationError):
        store.set_person_report_status(rid, PersonReportStatus.MATCH_PROPOSED, None)


# --- listing ---

def test_list_reports_filters_and_order(tmp_path):
    times = iter(f"2026-08-0{i}T00:00:00+00:00" for i in range(1, 8))
    store = make_store(tmp_path, clock=lambda: next(times))
    open_ids = [store.submit_item_report(watch_report(description=f"open {i}")) for i in range(3)]
    claimed = store.submit_item_report(watch_report(description="claimed"))
    store.submit_person_report(missing_report())
    store.file_claim(claimed, Claim(report_id="", claimant_name="B", evidence_text="x"))

    result = store.list_reports(status="OPEN", kind="FOUND")
    assert [r.report_id for r in result] == list(reversed(open_ids))  # newest first

    # linear-scan oracle over all reports
    everything = list(store.items.values()) + list(store.person_reports.values())
    expected = sorted(
        (r for r in everything if r.status.value == "OPEN" and r.kind.value == "FOUND"),
        key=lambda r: (r.reported_at, r.report_id),
    )
    expected = sorted(expected, key=lambda r: r.reported_at, reverse=True)
    assert result == expected


def test_list_reports_empty_interval_and_paging(tmp_path):
    store = make_store(tmp_path)
    for i in range(5):
        store.submit_item_report(watch_report(description=f"r{i}"))
    assert store.list_reports(since="2030-01-01T00:00:00+00:00",
                              until="2020-01-01T00:00:00+00:00") == []
    page1 = store.list_reports(page=1, page_size=2)
    page2 = store.list_reports(page=2, page_size=2)
    page3 = store.list_reports(page=3, page_size=2)
    assert len(page1) == 2 and len(page2) == 2 and len(page3) == 1
    assert len({r.report_id for r in page1 + page2 + page3}) == 5
    with pytest.raises(BadPage):
        store.list_reports(page_size=0)
    with pytest.raises(BadPage):
        store.list_reports(page_size=501)
    with pytest.raises(BadPage):
        store.list_reports(page=0)


# --- dedup interleavings ---

def test_dedup_interleavings_equal_deduped_sequence(tmp_path):
    reports = [watch_report(origin=Origin("k", s), description=f"d{s}") for s in (1, 2)]
    # reference: each submitted once
    ref = make_store(tmp_path, "ref")
    for r in reports:
        ref.submit_item_report(r)
    ref_state = {rid: rep for rid, rep in ref.items.items()}
    ref_fields = sorted(
        (r.origin.seq, r.description, r.status.value) for r in ref_state.values()
    )
    for i, order in enumerate(itertools.permutations(reports + reports)):
        store = make_store(tmp_path, f"perm{i}")
        for r in order:
            store.submit_item_report(r)
        fields = sorted(
            (r.origin.seq, r.description, r.status.value) for r in store.items.values()
        )
        assert fields == ref_fields
        assert len(store.items) == 2
        store.close()


# --- snapshot ---

def test_snapshot_reopen_equivalence(tmp_path):
    store, rid, cid = claimed_store(tmp_path)
    store.submit_person_report(missing_report())
    store.write_snapshot()
    after = store.submit_item_report(watch_report(description="post-snapshot"))
    store.close()
    reopened = make_store(tmp_path)
    assert set(reopened.items) == set(store.items)
    assert reopened.items[rid].status is ItemStatus.CLAIM_PENDING
    assert reopened.claims[cid].decision is ClaimDecision.PENDING
    assert after in reopened.items


# --- blobs ---

def test_blob_store_roundtrip(tmp_path):
    store = make_store(tmp_path)
    ref = store.blobs.put(b"photo-bytes")
    assert store.blobs.get(ref) == b"photo-bytes"
    assert ref in store.blobs
    assert store.blobs.put(b"photo-bytes") == ref  # content-addressed dedup
    with pytest.raises(KeyError):
        store.blobs.get("0" * 64)
