from __future__ import annotations

import pytest

from modelshim.config import ShimConfig, default_instruction_dir
from modelshim.server import ShimService, create_app
from modelshim.toy import ToyModels


@pytest.fixture
def config(tmp_path) -> ShimConfig:
    return ShimConfig(
        artifact_dir=tmp_path / "store",
        instruction_dir=default_instruction_dir(),
    )


@pytest.fixture
def service(config) -> ShimService:
    return ShimService(config)


@pytest.fixture
def app(config):
    return create_app(config)


@pytest.fixture
def toy(tmp_path) -> ToyModels:
    return ToyModels(artifact_dir=tmp_path / "store")
