"""Provider gateway, prompt templates, and deterministic mocks."""

from conceptstudio.providers.base import (
    Capability,
    Provider,
    ProviderRequest,
    ProviderResponse,
    Usage,
)
from conceptstudio.providers.gateway import Gateway, GatewayConfig
from conceptstudio.providers.mock import MockProvider, MockScript, planted_error_script
from conceptstudio.providers.templates import (
    PAPER_VERBATIM_IDS,
    REGISTRY,
    PromptTemplate,
    get_template,
    registry_digest,
    render_template,
)

__all__ = [
    "PAPER_VERBATIM_IDS",
    "REGISTRY",
    "Capability",
    "Gateway",
    "GatewayConfig",
    "MockProvider",
    "MockScript",
    "PromptTemplate",
    "Provider",
    "ProviderRequest",
    "ProviderResponse",
    "Usage",
    "get_template",
    "planted_error_script",
    "registry_digest",
    "render_template",
]
