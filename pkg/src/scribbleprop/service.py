"""HTTP session service for interactive scribble propagation.

A session caches the decoded image, its superpixels, features, and adjacency
once at creation; the client then replaces the scribble set and triggers
propagation as often as it likes.  Propagation for an unchanged (revision,
options) pair is served from cache, so repeats are idempotent byte-for-byte.

The propagation path is the same code the CLI uses, so outputs are
bit-identical across the two front ends.
"""

from __future__ import annotations

import io
import threading
import time
import uuid
from dataclasses import dataclass, field, replace

from fastapi import Body, FastAPI, HTTPException, Query, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from . import errors
from .core import (ScribbleSet, decode_image_bytes, labelmap_png_bytes, load_image,
                   scribbleset_from_dict, scribbleset_to_json)
from .features import PairwiseParams
from .predictor import load_model
from .superpixel import boundary_overlay
from .trainer import SuperpixelParams, TrainConfig, propagate_context

MAX_SIDE = 4096


class PropagateOptions(BaseModel):
    use_pairwise: bool = True
    predictor: str = "none"
    lambda_: float = Field(default=1.0, alias="lambda")

    model_config = {"populate_by_name": True}


@dataclass
class Session:
    id: str
    ctx: object                      # PropagationContext-shaped cache (lambda = 1)
    overlay_png: bytes
    scribbles: ScribbleSet
    revision: int = 0
    labels_png: bytes | None = None
    last_energy: float | None = None
    last_key: tuple | None = None
    touched: float = 0.0
    lock: threading.Lock = field(default_factory=threading.Lock)


def create_app(model_path=None, ttl=1800, cors_origin="*", static_dir=None):
    app = FastAPI(title="scribbleprop session service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[cors_origin] if cors_origin != "*" else ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    model = load_model(model_path) if model_path else None
    sessions = {}
    store_lock = threading.Lock()

    def sweep():
        now = time.monotonic()
        with store_lock:
            stale = [sid for sid, s in sessions.items() if now - s.touched > ttl]
            for sid in stale:
                del sessions[sid]

    def get_session(sid):
        sweep()
        with store_lock:
            session = sessions.get(sid)
        if session is None:
            raise HTTPException(404, f"unknown session {sid}")
        session.touched = time.monotonic()
        return session

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request,
                             path: str | None = Query(default=None),
                             k: float = Query(default=100.0),
                             sigma: float = Query(default=0.5),
                             min_size: int = Query(default=50)):
        sweep()
        try:
            if path is not None:
                image = load_image(path)
            else:
                data = await request.body()
                if not data:
                    raise HTTPException(400, "provide image bytes or ?path=")
                image = decode_image_bytes(data)
        except (errors.MissingFile, errors.UnsupportedFormat, errors.CorruptData) as e:
            raise HTTPException(400, str(e))
        if max(image.width, image.height) > MAX_SIDE:
            raise HTTPException(413, f"image side exceeds {MAX_SIDE} px")

        config = TrainConfig(superpixel=SuperpixelParams(k=k, sigma=sigma, min_size=min_size),
                             pairwise=PairwiseParams(lambda_=1.0))
        empty = ScribbleSet("session", image.width, image.height, [])
        try:
            config.validate()
            # build_context needs a scribble; cache the heavy parts manually
            ctx = _session_context(image, empty, config)
        except errors.InvalidParameter as e:
            raise HTTPException(400, str(e))
        overlay = _overlay_png(image, ctx.spmap)
        session = Session(id=uuid.uuid4().hex, ctx=ctx, overlay_png=overlay,
                          scribbles=empty, touched=time.monotonic())
        with store_lock:
            sessions[session.id] = session
        return {"id": session.id, "width": image.width, "height": image.height,
                "superpixel_count": ctx.spmap.count}

    @app.put("/sessions/{sid}/scribbles")
    def put_scribbles(sid: str, payload: dict = Body(...)):
        session = get_session(sid)
        try:
            sset = scribbleset_from_dict(payload)
        except (errors.SchemaViolation, errors.OutOfBoundsCoordinate,
                errors.EmptyPolyline) as e:
            raise HTTPException(422, str(e))
        if (sset.width, sset.height) != (session.ctx.image.width, session.ctx.image.height):
            raise HTTPException(422, "scribble dimensions do not match the session image")
        with session.lock:
            session.scribbles = sset
            session.revision += 1
            return {"revision": session.revision}

    @app.post("/sessions/{sid}/propagate")
    def propagate(sid: str, options: PropagateOptions = Body(default=PropagateOptions())):
        session = get_session(sid)
        if options.predictor not in ("none", "model"):
            raise HTTPException(400, "predictor must be 'none' or 'model'")
        if options.predictor == "model" and model is None:
            raise HTTPException(400, "no model configured; start the server with --model")
        with session.lock:
            if not session.scribbles.scribbles:
                raise HTTPException(409, "session has no scribbles")
            key = (session.revision, options.use_pairwise, options.predictor,
                   options.lambda_)
            if key != session.last_key:
                config = TrainConfig(
                    use_pairwise=options.use_pairwise,
                    pairwise=PairwiseParams(lambda_=options.lambda_),
                )
                ctx = _with_scribbles(session.ctx, session.scribbles, options.lambda_)
                predictor = model if options.predictor == "model" else None
                try:
                    _, labelmap, energy = propagate_context(ctx, predictor, config)
                except errors.UniverseMismatch as e:
                    raise HTTPException(400, str(e))
                except errors.NoFeasibleLabeling as e:
                    raise HTTPException(409, str(e))
                session.labels_png = labelmap_png_bytes(labelmap)
                session.last_energy = energy
                session.last_key = key
            return {"revision": session.revision, "energy": session.last_energy,
                    "labels_url": f"/sessions/{sid}/labels.png"}

    @app.get("/sessions/{sid}/labels.png")
    def get_labels(sid: str):
        session = get_session(sid)
        if session.labels_png is None:
            raise HTTPException(409, "propagate before requesting labels")
        return Response(content=session.labels_png, media_type="image/png")

    @app.get("/sessions/{sid}/superpixels.png")
    def get_superpixels(sid: str):
        session = get_session(sid)
        return Response(content=session.overlay_png, media_type="image/png")

    @app.get("/sessions/{sid}/scribbles")
    def get_scribbles(sid: str):
        session = get_session(sid)
        return Response(content=scribbleset_to_json(session.scribbles),
                        media_type="application/json")

    @app.delete("/sessions/{sid}", status_code=204)
    def delete_session(sid: str):
        get_session(sid)
        with store_lock:
            sessions.pop(sid, None)
        return Response(status_code=204)

    if static_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app


# ---------------------------------------------------------------------------
# session-side context plumbing

def _session_context(image, empty_scribbles, config):
    """Superpixels + features + unit-lambda edge weights, scribble-independent."""
    from .features import edge_weights, superpixel_features
    from .superpixel import adjacency, segment_fh
    from .trainer import PropagationContext

    sp = config.superpixel
    spmap = segment_fh(image, k=sp.k, sigma=sp.sigma, min_size=sp.min_size)
    edges = adjacency(spmap)
    feats = superpixel_features(image, spmap, norm=config.hist_norm)
    weights = edge_weights(feats, edges, PairwiseParams(lambda_=1.0))
    return PropagationContext(image, spmap, edges, feats, weights, [], None)


def _with_scribbles(ctx, scribbles, lam):
    """Bind the current scribble set (and pairwise scale) to the cached context."""
    from .energy import scribble_unary, universe_from_scribbles
    from .superpixel import scribble_overlap

    universe = universe_from_scribbles(scribbles)
    overlaps = scribble_overlap(ctx.spmap, scribbles)
    scr_table = scribble_unary(overlaps, universe)
    return replace(ctx, weights=ctx.weights * lam, universe=universe, scr_table=scr_table)


def _overlay_png(image, spmap):
    from PIL import Image as PilImage

    overlay = boundary_overlay(image, spmap)
    buf = io.BytesIO()
    PilImage.fromarray(overlay.pixels, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()
