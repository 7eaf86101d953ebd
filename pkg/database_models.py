"""
Database models for the convergence-run archive
"""

import logging
import os
from datetime import datetime

from sqlalchemy import JSON, Column, DateTime, Float, ForeignKey, Integer, String, create_engine
from sqlalchemy.orm import declarative_base, relationship, sessionmaker

logger = logging.getLogger(__name__)

# Get database URL from environment variables
DATABASE_URL = os.environ.get('DATABASE_URL', '')

# SQLite file in the working directory as fallback
if not DATABASE_URL:
    DATABASE_URL = 'sqlite:///aduals_runs.db'
    logger.debug("No DATABASE_URL environment variable found. Using %s", DATABASE_URL)

engine = create_engine(DATABASE_URL)

Base = declarative_base()


class ConvergenceRun(Base):
    """
    One invocation of the convergence harness
    """
    __tablename__ = 'convergence_runs'

    id = Column(Integer, primary_key=True)
    created = Column(DateTime, default=datetime.utcnow, index=True)
    case = Column(String(20), nullable=False)
    method = Column(String(10), nullable=False)
    orders = Column(String(50))  # e.g. "3,4,5,6"
    kernels = Column(String(50))  # e.g. "K,L,Orthogonal"
    levels = Column(String(100))  # e.g. "4,8,16,32,64"

    # Terminal slopes and anything else worth keeping
    details = Column(JSON)

    entries = relationship("ConvergenceEntry", back_populates="run", cascade="all, delete-orphan")

    def __repr__(self):
        return f"<ConvergenceRun(id={self.id}, case='{self.case}', orders='{self.orders}')>"


class ConvergenceEntry(Base):
    """
    One (order, kernel, level) row of a convergence run
    """
    __tablename__ = 'convergence_entries'

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey('convergence_runs.id'), nullable=False, index=True)
    m = Column(Integer, nullable=False)
    case = Column(String(20), nullable=False)
    kernel = Column(String(20), nullable=False)
    N = Column(Integer, nullable=False)
    h = Column(Float, nullable=False)
    l2_error = Column(Float, nullable=False)
    slope = Column(Float)  # empty on the first level

    run = relationship("ConvergenceRun", back_populates="entries")

    def __repr__(self):
        return f"<ConvergenceEntry(m={self.m}, kernel='{self.kernel}', N={self.N})>"


def create_tables(bind=None):
    """Create all the tables in the database"""
    Base.metadata.create_all(bind or engine)


def get_session(bind=None):
    """Get a session to interact with the database"""
    Session = sessionmaker(bind=bind or engine)
    return Session()


if __name__ == '__main__':
    logging.basicConfig(level=logging.INFO)
    create_tables()
    logger.info("Database tables created at %s", DATABASE_URL)
