from pydantic_settings import BaseSettings
from dotenv import load_dotenv

load_dotenv()

class Settings(BaseSettings):
    # Diretórios e banco do arquivo de pesos
    DATA_DIR: str = "data/run"
    WEIGHTS_DIR: str = "data/run/store/weights"
    WEIGHTS_DB_URL: str = "sqlite+aiosqlite:///data/run/store/weights/weights.db"

    # Logs
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "%(asctime)s %(levelname)s %(name)s: %(message)s"

    # Cenário padrão (escala de bancada)
    DEFAULT_TOPOLOGY: str = "data/topologies/synthetic8.json"
    DEFAULT_SCHEDULE: str = "default:400"
    SEED: int = 7
    FLOWS_PER_SECOND: float = 5.0
    FLOW_DURATION_S: float = 10.0
    SNAPSHOT_S: float = 10.0
    DATASET_SNAPSHOTS: int = 12

    # Tráfego e oráculo
    RATE_SCALE: float = 0.005
    CONGESTION_LOAD: float = 1.5
    BUFFER_PKTS: int = 64

    # Detector KSWIN
    KSWIN_ALPHA: float = 0.001
    KSWIN_WINDOW: int = 300
    KSWIN_STAT_SIZE: int = 30

    # Treinamento do VTwin
    TRAIN_EPOCHS: int = 50
    TRAIN_LR: float = 0.001
    TRAIN_BATCH_SIZE: int = 2
    EMBED_DIM: int = 16
    MP_ITERATIONS: int = 12

    # Monitoramento de SLA e métricas
    PDB_BETA: float = 3.0
    PDB_FLOOR_S: float = 0.001
    NMSE_WINDOW: int = 100

    # Sincronização
    RETRAIN_LAG_SNAPSHOTS: int = 0
    RETRAIN_SCOPE: str = "phase"

    class Config:
        env_file = ".env"
        case_sensitive = True
        extra = 'ignore'

settings = Settings()
