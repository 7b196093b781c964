"""HTTP service backing the query studio: clip listings, 2D projections,
query specs, and on-demand separation with cached audio rendering."""

import hashlib
import io
import json

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import Response
from pydantic import BaseModel
from scipy.io import wavfile

from .geometry import Hyperellipsoid, contains
from .pipeline import SpecStore
from .retrieval import score_separation
from .separator import load_checkpoint, oracle_separate, separate
from .signal import snr


class SeparateRequest(BaseModel):
    clip_id: str
    query_index: int = 0
    axes_pair: tuple[int, int] = (0, 1)
    center: tuple[float, float] = (0.0, 0.0)  # offset in the cross-section plane
    radii: tuple[float, float]
    t: float = 0.5  # interpolation for the remaining axes
    mode: str = "oracle"


class ServiceState:
    def __init__(self, manifest_root, model_path=None):
        self.store = SpecStore(manifest_root)
        self.model = load_checkpoint(model_path) if model_path else None
        self.audio_cache = {}

    def swap_model(self, model):
        # atomic attribute replace: in-flight requests keep their reference
        self.model = model


def _lift_query(spec, req: SeparateRequest) -> Hyperellipsoid:
    """Lift the UI's 2D ellipse to full dimension: the spec's center/axes with
    the selected pair's radii replaced and the rest at the interpolation t."""
    i, j = req.axes_pair
    D = spec.dim
    if not (0 <= i < D and 0 <= j < D and i != j):
        raise HTTPException(422, detail=f"axes_pair out of range for D={D}")
    if min(req.radii) <= 0:
        raise HTTPException(422, detail="radii must be positive")
    if not (0.0 <= req.t <= 1.0):
        raise HTTPException(422, detail="t must be in [0, 1]")
    radii = spec.interpolated(req.t).radii.copy()
    radii[i], radii[j] = req.radii
    center = (spec.center
              + spec.axes[:, i] * req.center[0]
              + spec.axes[:, j] * req.center[1])
    return Hyperellipsoid(center=center, axes=spec.axes, radii=radii)


def _wav_bytes(audio):
    buf = io.BytesIO()
    data = audio.samples.T.astype(np.float32)
    wavfile.write(buf, audio.sample_rate, data)
    return buf.getvalue()


def create_app(manifest_root, model_path=None) -> FastAPI:
    app = FastAPI(title="regionsep query studio service")
    state = ServiceState(manifest_root, model_path)
    app.state.service = state
    store = state.store

    def clip_specs(clip_id):
        track_id = clip_id.split(":")[0]
        if track_id not in store.manifest.track_entries:
            raise HTTPException(404, detail=f"unknown clip {clip_id}")
        specs = [s for s in store.specs(track_id) if s.clip_id == clip_id]
        if not specs:
            raise HTTPException(404, detail=f"no query specs for clip {clip_id}")
        return specs

    @app.get("/clips")
    def list_clips():
        out = []
        for track_id in store.manifest.track_ids():
            clip_ids = sorted({s.clip_id for s in store.specs(track_id)})
            for cid in clip_ids:
                out.append({"clip_id": cid, "track": track_id,
                            "split": store.manifest.track_entries[track_id]["split"]})
        return {"clips": out}

    @app.get("/clips/{clip_id}/projection")
    def projection(clip_id: str):
        specs = clip_specs(clip_id)
        track_id = clip_id.split(":")[0]
        track = store.manifest.track_entries[track_id]
        indices = sorted(set().union(*[
            s.target_indices | s.non_target_indices | s.eliminated_indices
            for s in specs]))
        points = []
        for idx in indices:
            z = store.projected_embedding(clip_id, idx)
            stem = track["stems"][idx]
            points.append({"stem_index": idx, "stem_id": stem["id"],
                           "class_label": stem["class"],
                           "x": float(z[0]), "y": float(z[1])})
        return {"clip_id": clip_id, "points": points}

    @app.get("/clips/{clip_id}/queries")
    def queries(clip_id: str):
        specs = clip_specs(clip_id)
        return {"clip_id": clip_id, "queries": [
            {
                "query_index": k,
                "dim": s.dim,
                "center": s.center.tolist(),
                "axes": s.axes.tolist(),
                "inclusion_radii": s.inclusion_radii.tolist(),
                "exclusion_radii": s.exclusion_radii.tolist(),
                "target_indices": sorted(s.target_indices),
                "non_target_indices": sorted(s.non_target_indices),
                "eliminated_indices": sorted(s.eliminated_indices),
            } for k, s in enumerate(specs)
        ]}

    @app.post("/separate")
    def do_separate(req: SeparateRequest):
        specs = clip_specs(req.clip_id)
        if not (0 <= req.query_index < len(specs)):
            raise HTTPException(404, detail=f"no query {req.query_index}")
        if req.mode not in ("oracle", "model"):
            raise HTTPException(422, detail="mode must be oracle or model")
        model = state.model
        if req.mode == "model" and model is None:
            raise HTTPException(409, detail="no separator model loaded")
        spec = specs[req.query_index]
        query = _lift_query(spec, req)
        track, chunks = store.clip_stems(req.clip_id)
        active = sorted(spec.target_indices | spec.non_target_indices)
        emb = np.zeros((len(chunks), spec.dim))
        for idx in active:
            emb[idx] = store.projected_embedding(req.clip_id, idx)
        members = [idx for idx in active if contains(query, emb[idx])]
        active_chunks = [chunks[i] for i in active]
        from .dataset import mix
        mixture = mix(active_chunks)
        if req.mode == "oracle":
            est = oracle_separate(active_chunks, emb[active], query)
        else:
            est = separate(mixture, query, model)
        target = mix([chunks[i] for i in members], like=mixture)
        value = snr(est, target)
        scores = score_separation(
            est, [chunks[i] for i in members],
            [chunks[i] for i in active if i not in members])
        token = hashlib.sha1(
            json.dumps(req.model_dump(), sort_keys=True).encode()).hexdigest()[:16]
        state.audio_cache[token] = _wav_bytes(est)
        # the mixture depends on the spec's surviving stems, not the ellipse
        mix_token = hashlib.sha1(
            f"mix:{req.clip_id}:{req.query_index}".encode()).hexdigest()[:16]
        state.audio_cache.setdefault(mix_token, _wav_bytes(mixture))
        nonmembers = [i for i in active if i not in members]
        return {
            "clip_id": req.clip_id,
            "member_stems": [track.stems[i].stem_id for i in members],
            "member_indices": members,
            "snr_db": value,
            "scores": {
                "members": dict(zip(
                    [track.stems[i].stem_id for i in members],
                    scores.phi_hat.tolist())),
                "non_members": dict(zip(
                    [track.stems[i].stem_id for i in nonmembers],
                    scores.phi_hat_perp.tolist())),
            },
            "audio_url": f"/audio/{token}",
            "mixture_audio_url": f"/audio/{mix_token}",
        }

    @app.get("/audio/{token}")
    def audio(token: str):
        if token not in state.audio_cache:
            raise HTTPException(404, detail="unknown audio token")
        return Response(content=state.audio_cache[token], media_type="audio/wav")

    return app
