"""Hierarquia de erros de domínio do gêmeo digital.

Os routers convertem esses erros em HTTPException; a CLI aborta a execução
com a mensagem, que sempre nomeia a entidade envolvida.
"""


class NdtError(Exception):
    pass


class TopologyError(NdtError, ValueError):
    pass


class RoutingError(NdtError):
    pass


class TrafficError(NdtError, ValueError):
    pass


class SimulationError(NdtError):
    pass


class FeatureError(NdtError, ValueError):
    pass


class ModelError(NdtError, ValueError):
    pass


class WeightsFormatError(ModelError):
    pass


class TrainingDivergedError(NdtError):
    def __init__(self, message: str, weights=None, history=None):
        super().__init__(message)
        self.weights = weights
        self.history = history or []


class DatastoreError(NdtError):
    pass


class CorruptRecordError(DatastoreError):
    pass


class WeightsNotFoundError(DatastoreError):
    pass


class ModelNotDeployedError(NdtError):
    pass


class SyncError(NdtError):
    pass


class SyncStateError(SyncError):
    pass


class MetricError(NdtError, ValueError):
    pass


class ScenarioError(NdtError):
    pass
