from crossdesign.workflow.iteration_status import IterationStatus, IterationStatusTracker

__all__ = ['IterationStatus', 'IterationStatusTracker']
