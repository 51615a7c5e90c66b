import base64
import json
from types import SimpleNamespace

import pytest
from fastapi.testclient import TestClient

from mfkit.config import ServiceConfig
from mfkit.dataset import identity_seeds
from mfkit.imageio import encode_image
from mfkit.pipeline import training_chip
from mfkit.recognition import save_model_file, train_eigenmodel
from mfkit.service import MFService, create_app
from mfkit.synthid import generate_synthetic_identity

ADMIN = {"Authorization": "Bearer t-admin"}
STAFF = {"Authorization": "Bearer t-staff"}
PUBLIC = {"Authorization": "Bearer t-public"}
KIOSK = {"Authorization": "Bearer t-kiosk"}

N_IDENTITIES = 6


@pytest.fixture(scope="session")
def corpus():
    seeds = identity_seeds(7, N_IDENTITIES)
    return {f"id{i}": generate_synthetic_identity(s, 4) for i, s in enumerate(seeds)}


@pytest.fixture(scope="session")
def model(corpus):
    chips = [training_chip(img) for imgs in corpus.values() for img in imgs[:3]]
    return train_eigenmodel(chips, k=16)


@pytest.fixture()
def env(tmp_path, corpus, model):
    data_dir = tmp_path / "data"
    data_dir.mkdir()
    save_model_file(model, data_dir / "model.mfem")
    tokens = tmp_path / "tokens.json"
    tokens.write_text(json.dumps({"tokens": [
        {"token": "t-admin", "role": "admin", "operator": "op-1"},
        {"token": "t-staff", "role": "staff"},
        {"token": "t-public", "role": "public"},
        {"token": "t-kiosk", "role": "kiosk", "kiosk_id": "box-1"},
    ]}))
    config = ServiceConfig(data_dir=str(data_dir), tokens_file=str(tokens), threshold=2.0)
    service = MFService(config, fsync=False)
    client = TestClient(create_app(service))
    yield SimpleNamespace(service=service, client=client, config=config,
                          corpus=corpus, tmp=tmp_path)
    service.close()


def pgm(image) -> bytes:
    return encode_image(image)


def enroll_person(env, label, headers=ADMIN):
    files = [("photos", (f"{label}-{i}.pgm", pgm(img), "application/octet-stream"))
             for i, img in enumerate(env.corpus[label][:3])]
    resp = env.client.post("/api/v1/persons", headers=headers,
                           data={"full_name": f"Person {label}", "nationality": "xx"},
                           files=files)
    assert resp.status_code == 201, resp.text
    return resp.json()["person_id"]


# --- auth ---

def test_healthz_is_open(env):
    resp = env.client.get("/api/v1/healthz")
    assert resp.status_code == 200
    assert resp.json()["model_version"] == 1


def test_missing_and_unknown_token(env):
    assert env.client.get("/api/v1/alerts").status_code == 401
    assert env.client.get("/api/v1/alerts",
                          headers={"Authorization": "Bearer nope"}).status_code == 401


def test_role_enforcement(env):
    # public cannot identify; staff cannot ack alerts or decide claims
    resp = env.client.post("/api/v1/identify", headers=PUBLIC,
                           files={"photo": ("x.pgm", pgm(env.corpus["id0"][0]))})
    assert resp.status_code == 403
    assert env.client.post("/api/v1/alerts/xyz/ack", headers=STAFF).status_code == 403
    assert env.client.post("/api/v1/claims/xyz/decision", headers=STAFF,
                           json={"decision": "ACCEPTED"}).status_code == 403


# --- enrollment + identify ---

def test_enroll_and_identify_end_to_end(env):
    person_ids = {label: enroll_person(env, label) for label in ("id0", "id1", "id2")}
    assert env.client.get("/api/v1/healthz").json()["gallery_persons"] == 3

    # probe with the held-out 4th variation
    probe = env.corpus["id0"][3]
    resp = env.client.post("/api/v1/identify", headers=STAFF,
                           data={"top_n": "3"},
                           files={"photo": ("probe.pgm", pgm(probe))})
    assert resp.status_code == 200, resp.text
    body = resp.json()
    assert body["matches"], "expected at least one match"
    assert body["matches"][0]["person_id"] == person_ids["id0"]
    assert body["matches"][0]["rank"] == 1
    assert body["matches"][0]["full_name"] == "Person id0"
    ranks = [m["rank"] for m in body["matches"]]
    assert ranks == list(range(1, len(ranks) + 1))
    distances = [m["distance"] for m in body["matches"]]
    assert distances == sorted(distances)
    assert all(d <= body["threshold"] for d in distances)
    assert body["face_box"]["w"] >= 16


def test_enroll_requires_three_photos(env):
    files = [("photos", ("a.pgm", pgm(env.corpus["id0"][0])))]
    resp = env.client.post("/api/v1/persons", headers=ADMIN,
                           data={"full_name": "X"}, files=files)
    assert resp.status_code == 422


def test_identify_blank_photo(env):
    enroll_person(env, "id0")
    blank = bytes([200]) * (96 * 96)
    resp = env.client.post("/api/v1/identify", headers=STAFF,
                           files={"photo": ("b.pgm", b"P5 96 96 255\n" + blank)})
    assert resp.status_code == 422
    assert resp.json()["code"] == "no_face_detected"


def test_identify_empty_gallery(env):
    resp = env.client.post("/api/v1/identify", headers=STAFF,
                           files={"photo": ("p.pgm", pgm(env.corpus["id0"][0]))})
    assert resp.status_code == 409
    assert resp.json()["code"] == "empty_gallery"


def test_identify_garbage_photo(env):
    enroll_person(env, "id0")
    resp = env.client.post("/api/v1/identify", headers=STAFF,
                           files={"photo": ("p.bin", b"not an image at all")})
    assert resp.status_code == 400


def test_upload_size_cap(tmp_path, corpus, model):
    data_dir = tmp_path / "d"
    data_dir.mkdir()
    save_model_file(model, data_dir / "model.mfem")
    tokens = tmp_path / "t.json"
    tokens.write_text(json.dumps({"tokens": [{"token": "t-staff", "role": "staff"}]}))
    config = ServiceConfig(data_dir=str(data_dir), tokens_file=str(tokens),
                           max_upload_bytes=1024)
    service = MFService(config, fsync=False)
    client = TestClient(create_app(service))
    resp = client.post("/api/v1/identify", headers=STAFF,
                       files={"photo": ("p.pgm", pgm(corpus["id0"][0]))})
    assert resp.status_code == 413
    service.close()


# --- item reports, search, claims ---

def test_item_report_submit_then_search_immediately(env):
    resp = env.client.post("/api/v1/reports/items", headers=STAFF, json={
        "kind": "FOUND", "category": "watch",
        "description": "black casio watch with engraved zq9 serial",
        "location": "Gate 5",
    })
    assert resp.status_code == 201, resp.text
    rid = resp.json()["report_id"]
    # the paper's "immediately": the very next search sees it
    found = env.client.get("/api/v1/reports", headers=PUBLIC,
                           params={"query": "zq9"}).json()
    assert [hit["report"]["report_id"] for hit in found["results"]] == [rid]
    single = env.client.get(f"/api/v1/reports/{rid}", headers=PUBLIC)
    assert single.status_code == 200
    assert single.json()["description"].startswith("black casio")


def test_public_may_submit_lost_only(env):
    ok = env.client.post("/api/v1/reports/items", headers=PUBLIC, json={
        "kind": "LOST", "category": "phone", "description": "blue nokia", "location": "camp",
    })
    assert ok.status_code == 201
    forbidden = env.client.post("/api/v1/reports/items", headers=PUBLIC, json={
        "kind": "FOUND", "category": "phone", "description": "found phone", "location": "camp",
    })
    assert forbidden.status_code == 403


def test_item_report_validation(env):
    resp = env.client.post("/api/v1/reports/items", headers=STAFF, json={
        "kind": "FOUND", "category": "watch", "description": "", "location": "x",
    })
    assert resp.status_code == 422
    resp = env.client.post("/api/v1/reports/items", headers=STAFF, json={
        "kind": "TAKEN", "category": "watch", "description": "y", "location": "x",
    })
    assert resp.status_code == 422


def test_item_report_with_photo_multipart(env):
    photo = pgm(env.corpus["id1"][0])
    resp = env.client.post(
        "/api/v1/reports/items", headers=STAFF,
        data={"kind": "FOUND", "category": "bag", "description": "", "location": "plaza"},
        files={"photo": ("item.pgm", photo)},
    )
    assert resp.status_code == 201, resp.text
    ref = resp.json()["photo_ref"]
    got = env.client.get(f"/api/v1/photos/{ref}", headers=PUBLIC)
    assert got.status_code == 200 and got.content == photo
    assert env.client.get("/api/v1/photos/deadbeef", headers=PUBLIC).status_code == 404


def test_claim_lifecycle_and_alert(env):
    rid = env.client.post("/api/v1/reports/items", headers=STAFF, json={
        "kind": "FOUND", "category": "watch", "description": "golden watch", "location": "gate",
    }).json()["report_id"]

    resp = env.client.post(f"/api/v1/reports/{rid}/claims", headers=PUBLIC, json={
        "claimant_name": "A. Owner", "evidence_text": "engraving reads 'to my love'",
    })
    assert resp.status_code == 201, resp.text
    claim_id = resp.json()["claim_id"]
    assert resp.json()["report"]["status"] == "CLAIM_PENDING"

    # a CLAIM_FILED alert is visible to staff
    alerts = env.client.get("/api/v1/alerts", headers=STAFF,
                            params={"ack": "false"}).json()["alerts"]
    claim_alerts = [a for a in alerts if a["kind"] == "CLAIM_FILED"]
    assert any(a["payload"]["claim_id"] == claim_id for a in claim_alerts)

    # second claim while pending
    second = env.client.post(f"/api/v1/reports/{rid}/claims", headers=PUBLIC, json={
        "claimant_name": "B. Chancer", "evidence_text": "it is mine",
    })
    assert second.status_code == 409

    # empty evidence
    no_evidence = env.client.post(f"/api/v1/reports/{rid}/claims", headers=PUBLIC, json={
        "claimant_name": "C", "evidence_text": "   ",
    })
    assert no_evidence.status_code in (409, 422)  # blocked by pending claim first

    decided = env.client.post(f"/api/v1/claims/{claim_id}/decision", headers=ADMIN,
                              json={"decision": "ACCEPTED"})
    assert decided.status_code == 200
    assert decided.json()["report"]["status"] == "RESOLVED"
    again = env.client.post(f"/api/v1/claims/{claim_id}/decision", headers=ADMIN,
                            json={"decision": "DENIED"})
    assert again.status_code == 409

    # resolved reports drop out of status:open searches
    hits = env.client.get("/api/v1/reports", headers=STAFF,
                          params={"query": "golden status:open"}).json()["results"]
    assert all(h["report"]["report_id"] != rid for h in hits)
    hits = env.client.get("/api/v1/reports", headers=STAFF,
                          params={"query": "golden status:resolved"}).json()["results"]
    assert any(h["report"]["report_id"] == rid for h in hits)


def test_alert_acknowledge_flow(env):
    rid = env.client.post("/api/v1/reports/items", headers=STAFF, json={
        "kind": "FOUND", "category": "other", "description": "thing", "location": "x",
    }).json()["report_id"]
    env.client.post(f"/api/v1/reports/{rid}/claims", headers=PUBLIC,
                    json={"claimant_name": "A", "evidence_text": "e"})
    alert = env.client.get("/api/v1/alerts", headers=ADMIN,
                           params={"ack": "false"}).json()["alerts"][0]
    acked = env.client.post(f"/api/v1/alerts/{alert['alert_id']}/ack", headers=ADMIN)
    assert acked.status_code == 200
    assert acked.json()["acknowledged_by"] == "op-1"
    assert env.client.post(f"/api/v1/alerts/{alert['alert_id']}/ack",
                           headers=ADMIN).status_code == 409
    assert env.client.get("/api/v1/alerts", headers=ADMIN,
                          params={"ack": "false"}).json()["alerts"] == []
    assert env.client.post("/api/v1/alerts/missing/ack", headers=ADMIN).status_code == 404


# --- sync ingestion ---

def batch_body(kiosk_id, entries):
    from mfkit.recordlog import canonical_json, crc32c
    reports = [{"seq": seq, "report": payload} for seq, payload in entries]
    return {"kiosk_id": kiosk_id, "reports": reports,
            "checksum": crc32c(canonical_json(reports))}


def item_payload(i):
    return {"type": "item", "kind": "FOUND", "category": "watch",
            "description": f"watch nr {i}", "location": "gate"}


def test_sync_batch_idempotent(env):
    body = batch_body("box-1", [(i, item_payload(i)) for i in (1, 2, 3)])
    first = env.client.post("/api/v1/sync/batches", headers=KIOSK, json=body)
    assert first.status_code == 200, first.text
    assert first.json() == {"kiosk_id": "box-1", "high_water_seq": 3,
                            "accepted": 3, "duplicates": 0}
    snapshot = {rid: r for rid, r in env.service.store.items.items()}

    replay = env.client.post("/api/v1/sync/batches", headers=KIOSK, json=body)
    assert replay.json() == {"kiosk_id": "box-1", "high_water_seq": 3,
                             "accepted": 0, "duplicates": 3}
    assert env.service.store.items == snapshot

    overlap = batch_body("box-1", [(3, item_payload(3)), (4, item_payload(4))])
    resp = env.client.post("/api/v1/sync/batches", headers=KIOSK, json=overlap)
    assert resp.json() == {"kiosk_id": "box-1", "high_water_seq": 4,
                           "accepted": 1, "duplicates": 1}


def test_sync_batch_rejections(env):
    body = batch_body("box-1", [(1, item_payload(1))])
    body["checksum"] ^= 0xFF
    assert env.client.post("/api/v1/sync/batches", headers=KIOSK,
                           json=body).status_code == 400
    bad_order = batch_body("box-1", [(2, item_payload(2)), (1, item_payload(1))])
    assert env.client.post("/api/v1/sync/batches", headers=KIOSK,
                           json=bad_order).status_code == 400
    wrong_kiosk = batch_body("box-9", [(1, item_payload(1))])
    assert env.client.post("/api/v1/sync/batches", headers=KIOSK,
                           json=wrong_kiosk).status_code == 403
    empty = batch_body("box-1", [])
    resp = env.client.post("/api/v1/sync/batches", headers=KIOSK, json=empty)
    assert resp.status_code == 200
    assert resp.json()["accepted"] == 0


# --- person matching ---

def person_payload(env, label, kind, variation, subject=None):
    photo = base64.b64encode(pgm(env.corpus[label][variation])).decode("ascii")
    payload = {"kind": kind, "location": "sector 9", "photo_b64": photo}
    if subject:
        payload["subject_person_id"] = subject
    return payload


def test_person_match_alert_end_to_end(env):
    subject = enroll_person(env, "id3")
    # missing report first: no found reports yet, so no alerts
    missing = env.client.post("/api/v1/reports/persons", headers=STAFF,
                              json=person_payload(env, "id3", "MISSING", 0, subject))
    assert missing.status_code == 201, missing.text
    assert missing.json()["alerts_raised"] == 0
    missing_id = missing.json()["report"]["report_id"]

    # found report with the held-out variation of the same identity
    found = env.client.post("/api/v1/reports/persons", headers=STAFF,
                            json=person_payload(env, "id3", "FOUND_ALIVE", 3))
    assert found.status_code == 201, found.text
    assert found.json()["alerts_raised"] == 1
    found_id = found.json()["report"]["report_id"]

    alerts = env.client.get("/api/v1/alerts", headers=ADMIN).json()["alerts"]
    matches = [a for a in alerts if a["kind"] == "PERSON_MATCH"]
    assert len(matches) == 1
    payload = matches[0]["payload"]
    assert payload["missing_report_id"] == missing_id
    assert payload["found_report_id"] == found_id
    assert payload["person_id"] == subject
    assert payload["distance"] <= env.config.threshold

    for rid in (missing_id, found_id):
        report = env.client.get(f"/api/v1/reports/{rid}", headers=STAFF).json()
        assert report["status"] == "MATCH_PROPOSED"
        assert report["matched_person_id"] == subject

    # re-evaluation raises no duplicate alert for the pair
    raised = env.service.evaluate_person_matches(env.service.store.get_report(found_id))
    assert raised == []


def test_found_report_without_missing_matches_nothing(env):
    enroll_person(env, "id4")
    resp = env.client.post("/api/v1/reports/persons", headers=STAFF,
                           json=person_payload(env, "id4", "FOUND_ALIVE", 1))
    assert resp.status_code == 201
    assert resp.json()["alerts_raised"] == 0


def test_different_identity_does_not_match(env):
    subject = enroll_person(env, "id0")
    env.client.post("/api/v1/reports/persons", headers=STAFF,
                    json=person_payload(env, "id0", "MISSING", 0, subject))
    resp = env.client.post("/api/v1/reports/persons", headers=STAFF,
                           json=person_payload(env, "id5", "FOUND_ALIVE", 2))
    assert resp.json()["alerts_raised"] == 0


def test_confirm_match_via_status_endpoint(env):
    subject = enroll_person(env, "id2")
    env.client.post("/api/v1/reports/persons", headers=STAFF,
                    json=person_payload(env, "id2", "MISSING", 1, subject))
    found = env.client.post("/api/v1/reports/persons", headers=STAFF,
                            json=person_payload(env, "id2", "FOUND_ALIVE", 3))
    found_id = found.json()["report"]["report_id"]
    resp = env.client.post(f"/api/v1/reports/persons/{found_id}/status", headers=STAFF,
                           json={"status": "CONFIRMED"})
    assert resp.status_code == 200
    assert resp.json()["status"] == "CONFIRMED"
    bad = env.client.post(f"/api/v1/reports/persons/{found_id}/status", headers=STAFF,
                          json={"status": "MATCH_PROPOSED", "matched_person_id": subject})
    assert bad.status_code == 409


def test_person_report_requires_photo(env):
    resp = env.client.post("/api/v1/reports/persons", headers=STAFF,
                           json={"kind": "MISSING", "location": "x"})
    assert resp.status_code == 422


# --- search errors ---

def test_search_error_codes(env):
    assert env.client.get("/api/v1/reports", headers=PUBLIC,
                          params={"query": ""}).status_code == 422
    assert env.client.get("/api/v1/reports", headers=PUBLIC,
                          params={"query": '"unclosed'}).status_code == 422
    assert env.client.get("/api/v1/reports", headers=PUBLIC,
                          params={"query": "watch", "limit": 0}).status_code == 422


# --- restart durability ---

def test_state_survives_restart(env):
    enroll_person(env, "id1")
    rid = env.client.post("/api/v1/reports/items", headers=STAFF, json={
        "kind": "FOUND", "category": "phone", "description": "restart survivor zk17",
        "location": "tent",
    }).json()["report_id"]
    env.service.close()

    service2 = MFService(env.config, fsync=False)
    client2 = TestClient(create_app(service2))
    assert client2.get("/api/v1/healthz").json()["gallery_persons"] == 1
    hits = client2.get("/api/v1/reports", headers=STAFF,
                       params={"query": "zk17"}).json()["results"]
    assert [h["report"]["report_id"] for h in hits] == [rid]
    probe = env.corpus["id1"][3]
    resp = client2.post("/api/v1/identify", headers=STAFF,
                        files={"photo": ("p.pgm", pgm(probe))})
    assert resp.status_code == 200 and resp.json()["matches"]
    service2.close()
