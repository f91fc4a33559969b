"""Initialize a fresh sweep database with all tables."""

import sys
from pathlib import Path

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from kppfront.config.settings import get_settings
from kppfront.models.base import BaseModel, create_db_engine, init_db


def main() -> None:
    """Create every table in ``DATABASE_URL``, removing an existing SQLite file first."""
    url = get_settings().DATABASE_URL
    prefix = "sqlite:///"
    if url.startswith(prefix) and url != prefix + ":memory:":
        db_path = Path(url[len(prefix) :])
        if db_path.exists():
            db_path.unlink()
            print(f"Removed existing database at {db_path}")

    engine = create_db_engine(url)
    init_db(engine)
    print(f"Created new database at {url}")
    print("Tables created:")
    for table in BaseModel.metadata.tables:
        print(f"- {table}")


if __name__ == "__main__":
    main()
