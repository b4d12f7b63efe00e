"""
Collaborative Blacklisting API

FastAPI application exposing the simulator over HTTP: benefit metrics,
private set protocols with their leakage profile, EWMA prediction and
small experiment runs.
"""

import logging
from typing import Any, Dict, List, Optional, Tuple

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from core import __version__
from core.config import settings
from core.errors import CollabError, ConfigurationError, DataError, ProtocolError, UndefinedMetricError
from core.events import AttackEvent, Dataset, SourceSet, format_address, parse_address
from core.experiment import ExperimentConfig, run_experiment
from core.predictor import PredictionParams, ewma_scores, predict
from core.similarity import Metric, RangePolicy, plaintext_score
from protocols.psi import leakage_profile, open_sessions, pjs, psi, psi_ca, psi_dt

# Configure logging
logging.basicConfig(
    level=settings.LOG_LEVEL.upper(),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

app = FastAPI(
    title="Collaborative Predictive Blacklisting",
    description="Benefit estimation, private set protocols and EWMA attack prediction",
    version=__version__,
    docs_url="/docs",
    redoc_url="/redoc"
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

PROTOCOL_RUNNERS = {"psi": psi, "psi_ca": psi_ca, "psi_dt": psi_dt, "pjs": pjs}


class SimilarityRequest(BaseModel):
    """Two unique-source sets to score."""
    metric: Metric
    a: List[str] = Field(default_factory=list, description="Dotted-quad sources of the first victim")
    b: List[str] = Field(default_factory=list, description="Dotted-quad sources of the second victim")
    range_policy: RangePolicy = Field(default_factory=RangePolicy)


class SimilarityResponse(BaseModel):
    metric: Metric
    value: Optional[float] = Field(description="None when the metric is undefined for the inputs")
    defined: bool


class ProtocolRequest(BaseModel):
    """Server and client sets; associated_data maps a server source to (timestamp, port) records."""
    server: List[str] = Field(default_factory=list)
    client: List[str] = Field(default_factory=list)
    associated_data: Optional[Dict[str, List[Tuple[int, int]]]] = None


class ProtocolResponse(BaseModel):
    protocol: str
    client_output: Any
    server_output: Any
    leakage: dict


class EventInput(BaseModel):
    contributor_id: str
    source_ip: str
    target_port: int = Field(ge=0, le=65535)
    timestamp: int = Field(description="Seconds since the epoch, UTC")


class PredictRequest(BaseModel):
    victim: str
    test_day: int = Field(ge=2)
    events: List[EventInput]
    origin: Optional[int] = Field(default=None, description="UTC midnight of day 1; defaults to the first event's")
    params: PredictionParams = Field(default_factory=PredictionParams)


class WatchlistItem(BaseModel):
    source_ip: str
    score: float


class PredictResponse(BaseModel):
    victim: str
    test_day: int
    entries: List[WatchlistItem]


def _addresses(values: List[str]) -> frozenset:
    parsed = set()
    for text in values:
        address = parse_address(text)
        if address is None:
            raise HTTPException(status_code=400, detail=f"Invalid IPv4 address: {text}")
        parsed.add(address)
    return frozenset(parsed)


def _status(error: Exception) -> int:
    if isinstance(error, (ConfigurationError, DataError, ProtocolError)):
        return 400
    return 500


@app.get("/")
async def root():
    """Root endpoint with API information."""
    return {
        "message": "Collaborative Predictive Blacklisting API",
        "version": __version__,
        "docs": "/docs",
        "health": "/health"
    }


@app.get("/health")
async def health_check():
    """Health check endpoint."""
    return {
        "status": "healthy",
        "version": __version__,
        "components": {
            "similarity": "available",
            "protocols": sorted(PROTOCOL_RUNNERS),
            "predictor": "available"
        }
    }


@app.post("/similarity", response_model=SimilarityResponse)
async def similarity(request: SimilarityRequest):
    """Score two source sets with one benefit metric, in plaintext."""
    a = SourceSet("a", _addresses(request.a), (0, 0))
    b = SourceSet("b", _addresses(request.b), (0, 0))
    try:
        value = plaintext_score(request.metric, a, b, request.range_policy)
    except UndefinedMetricError:
        return SimilarityResponse(metric=request.metric, value=None, defined=False)
    except CollabError as e:
        raise HTTPException(status_code=_status(e), detail=str(e))
    return SimilarityResponse(metric=request.metric, value=value, defined=True)


def _jsonable(output):
    if isinstance(output, frozenset):
        return sorted(format_address(ip) for ip in output)
    if isinstance(output, dict):
        return {format_address(ip): [list(r) for r in records] for ip, records in sorted(output.items())}
    return output


@app.post("/protocols/{name}", response_model=ProtocolResponse)
def run_protocol(name: str, request: ProtocolRequest):
    """
    Run one private protocol between an in-process server and client.

    Returns both parties' outputs and the structural leakage profile of
    the transcript.
    """
    if name not in PROTOCOL_RUNNERS:
        raise HTTPException(status_code=404, detail=f"Unknown protocol: {name}")
    server_set = SourceSet("server", _addresses(request.server), (0, 0))
    client_set = SourceSet("client", _addresses(request.client), (0, 0))
    data = None
    if request.associated_data is not None:
        data = {}
        for text, records in request.associated_data.items():
            address = parse_address(text)
            if address is None:
                raise HTTPException(status_code=400, detail=f"Invalid IPv4 address: {text}")
            data[address] = list(records)

    try:
        server, client = open_sessions(server_set, client_set, associated_data=data)
        PROTOCOL_RUNNERS[name](server, client)
    except UndefinedMetricError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except CollabError as e:
        logger.error(f"Protocol {name} failed: {e}")
        raise HTTPException(status_code=_status(e), detail=str(e))

    logger.info(f"Protocol {name} done: |S|={len(server_set)}, |C|={len(client_set)}")
    return ProtocolResponse(
        protocol=name,
        client_output=_jsonable(client.output),
        server_output=_jsonable(server.output),
        leakage=leakage_profile(server.channel.transcript).model_dump(),
    )


@app.post("/predict", response_model=PredictResponse)
async def predict_attacks(request: PredictRequest):
    """EWMA watchlist for one victim from its training events."""
    events = []
    for item in request.events:
        address = parse_address(item.source_ip)
        if address is None:
            raise HTTPException(status_code=400, detail=f"Invalid IPv4 address: {item.source_ip}")
        events.append(AttackEvent(item.contributor_id, address, item.target_port, item.timestamp))
    dataset = Dataset.from_events(events, origin=request.origin)
    if dataset.origin is None:
        return PredictResponse(victim=request.victim, test_day=request.test_day, entries=[])

    log = dataset.log(request.victim)
    scores = ewma_scores(log.events, request.params, request.test_day, dataset.origin)
    watchlist = predict(scores, request.params, request.victim, request.test_day)
    return PredictResponse(
        victim=watchlist.victim,
        test_day=watchlist.test_day,
        entries=[WatchlistItem(source_ip=format_address(e.source_ip), score=e.score) for e in watchlist.entries],
    )


@app.post("/experiment")
def experiment(config: ExperimentConfig):
    """
    Run a (small) experiment and return its summary table.

    Nothing is written to disk; use the command line for full runs.
    """
    try:
        report = run_experiment(config)
    except CollabError as e:
        logger.error(f"Experiment failed: {e}")
        raise HTTPException(status_code=_status(e), detail=str(e))
    except Exception as e:
        logger.error(f"Experiment error: {str(e)}")
        raise HTTPException(status_code=500, detail=f"Experiment failed: {str(e)}")

    summary = report.summary.astype(object).where(report.summary.notna(), None)
    return {
        "run_id": config.resolved_run_id,
        "summary": summary.to_dict(orient="records"),
        "knowledge_correlation": report.knowledge,
        "timing_seconds": report.timing,
    }


@app.middleware("http")
async def log_requests(request: Request, call_next):
    """Middleware to log all requests."""
    logger.info(f"Request: {request.method} {request.url}")
    response = await call_next(request)
    logger.info(f"Response: {response.status_code}")
    return response


if __name__ == "__main__":
    import uvicorn

    uvicorn.run(
        "app:app",
        host=settings.HOST,
        port=settings.PORT,
        reload=False,
        log_level="info"
    )
