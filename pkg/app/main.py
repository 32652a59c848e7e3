from contextlib import asynccontextmanager

from fastapi import FastAPI

from src.core.config import settings
from src.core.logging import configure_logging
from src.routers import sla_controller, twin_controller, weights_controller
from src.services.twin_service import TwinRuntime

version = "v1"
version_prefix = f"/api/{version}"
description = "Gêmeo digital de rede: previsão de atraso por fluxo, arquivo de pesos do VTwin e monitoramento de SLA"


@asynccontextmanager
async def lifespan(app: FastAPI):
    configure_logging()
    app.state.runtime = await TwinRuntime.open(settings.WEIGHTS_DIR, settings.WEIGHTS_DB_URL)
    yield
    await app.state.runtime.close()


app = FastAPI(
    title="NDTwin",
    description=description,
    version=version,
    contact={
        "name": "Everlon Passos",
        "url": "https://github.com/everlon",
        "email": "everlon@protonmail.com",
    },
    openapi_url=f"{version_prefix}/openapi.json",
    docs_url=f"{version_prefix}/docs",
    redoc_url=f"{version_prefix}/redoc",
    lifespan=lifespan,
)


@app.get("/")
async def root():
    return {"message": "Gêmeo digital de rede em operação"}


app.include_router(
    twin_controller.router,
    prefix=f"{version_prefix}/twin",
    tags=["twin"],
)

app.include_router(
    weights_controller.router,
    prefix=f"{version_prefix}/weights",
    tags=["weights"],
)

app.include_router(
    sla_controller.router,
    prefix=f"{version_prefix}/sla",
    tags=["sla"],
)
