import pytest

from waterdesk.coretypes import DatasetDescriptor, FieldDef, GeoRegion, Record, Schema
from waterdesk.platform import Platform, PlatformConfig


@pytest.fixture
def platform():
    return Platform(PlatformConfig(synchronous_webhooks=True, webhook_backoff_s=0.0))


@pytest.fixture
def admin(platform):
    return platform.bootstrap_admin("root", "root-secret").principal_id


@pytest.fixture
def project(platform, admin):
    return platform.create_project("demo", admin)


FISH_SCHEMA = Schema((
    FieldDef("site", "string"),
    FieldDef("species", "string"),
    FieldDef("count", "integer"),
    FieldDef("note", "string", required=False),
))


def make_dataset(platform, admin, project, name="fish-survey", study_type="fish",
                 schema=FISH_SCHEMA, region=GeoRegion(-80.0, 43.0, -79.0, 44.0)):
    desc = DatasetDescriptor(name=name, study_type=study_type, schema=schema,
                             project_id=project.project_id, region=region)
    platform.create_dataset(desc, admin)
    return desc


def fish(record_id, site="s1", species="brook trout", count=1, **extra):
    return Record(record_id, {"site": site, "species": species, "count": count, **extra})
