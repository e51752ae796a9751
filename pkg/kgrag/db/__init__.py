from .graph import Direction, GraphStats, KnowledgeGraph
from .models import *
