"""
FastAPI service for the optostore simulator
Lifespan validates the presets once and configures run tracking
"""
import logging
import time
from contextlib import asynccontextmanager
from typing import AsyncGenerator

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware

from .config import settings
from .models import PRESETS, SCENARIOS, HealthResponse, validate_params
from .routers import simulate_router

# ============ Logging Configuration ============
logging.basicConfig(
    level=settings.LOG_LEVEL,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)


# ============ Lifespan Context Manager ============
@asynccontextmanager
async def lifespan(app: FastAPI) -> AsyncGenerator[None, None]:
    """Check every sample preset and set up mlflow before accepting requests."""
    logger.info(f"🚀 Starting {settings.APP_NAME} {settings.APP_VERSION}...")

    for label, params in PRESETS.items():
        report = validate_params(params)
        if not report.usable:
            raise RuntimeError(f"preset {label} failed validation: {[c.name for c in report.errors]}")
        logger.debug(f"Preset {label}: {params.describe_mhz()}")
    app.state.presets = tuple(PRESETS)
    logger.info(f"✅ {len(PRESETS)} sample presets validated")

    app.state.tracking_enabled = settings.MLFLOW_ENABLED
    if settings.MLFLOW_ENABLED:
        import mlflow

        mlflow.set_tracking_uri(settings.MLFLOW_TRACKING_URI)
        mlflow.set_experiment(settings.MLFLOW_EXPERIMENT_NAME)
        logger.info(f"✅ MLflow tracking to {settings.MLFLOW_TRACKING_URI}")

    yield

    app.state.tracking_enabled = False
    logger.info("🛑 optostore service stopped")


# ============ FastAPI App ============
app = FastAPI(
    title=settings.APP_NAME,
    description=settings.APP_DESCRIPTION,
    version=settings.APP_VERSION,
    lifespan=lifespan
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.CORS_ORIGINS,
    allow_methods=["GET", "POST"],
    allow_headers=["*"],
)

app.include_router(simulate_router)


# ============ Request Timing Middleware ============
@app.middleware("http")
async def time_requests(request: Request, call_next):
    started = time.perf_counter()
    response = await call_next(request)
    elapsed = time.perf_counter() - started
    response.headers["X-Elapsed-Seconds"] = f"{elapsed:.3f}"
    logger.debug(f"{request.method} {request.url.path} -> {response.status_code} in {elapsed:.3f} s")
    return response


# ============ Root Endpoints ============
@app.get("/")
async def root():
    """Service name, version and the scenarios it can run."""
    return {
        "service": settings.APP_NAME,
        "version": settings.APP_VERSION,
        "scenarios": list(SCENARIOS),
    }


@app.get("/health", response_model=HealthResponse)
async def health_check():
    return HealthResponse(
        status="healthy",
        tracking_enabled=getattr(app.state, "tracking_enabled", False)
    )


if __name__ == "__main__":
    import uvicorn

    uvicorn.run("optostore.main:app", host=settings.HOST, port=settings.PORT, reload=settings.DEBUG)
