from contextlib import asynccontextmanager

import anyio.to_thread
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from qcfold.config import get_settings
from qcfold.log import configure_logging
from qcfold.routes.solve import router as solve_router

settings = get_settings()
configure_logging(settings.log_level)


@asynccontextmanager
async def lifespan(app: FastAPI):
    # solves run in the worker thread pool; QCFOLD_THREADS caps how many at once
    if settings.threads:
        anyio.to_thread.current_default_thread_limiter().total_tokens = settings.threads
    yield


app = FastAPI(title="qcfold", lifespan=lifespan)

# CORS: allow a browser front end on another origin to call the API
app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.cors_origins,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Register solver endpoints under /api/*
app.include_router(solve_router)


@app.get("/health")
def health_check():
    return {"status": "ok", "threads": settings.threads}
