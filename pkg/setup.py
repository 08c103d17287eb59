from setuptools import setup, find_packages

setup(
    name="crossdesign",
    version="0.1.0",
    description="Conditional cross-design synthesis estimators and simulation harness",
    packages=find_packages(exclude=["examples", "examples.*"]),
    package_data={
        "crossdesign.tests": ["data/*.csv"],
    },
    install_requires=[
        'numpy>=1.22.0',
        'scipy>=1.8.0',
        'pandas>=1.5.0',
        'scikit-learn>=1.1.0',
        'click>=8.0.0',
        'pytest>=7.0.0',
        'pytest-cov>=3.0.0',
        'psutil>=5.9.0',
        'python-dotenv>=0.19.0',
        'pydantic>=2.0.0',
        'structlog>=21.5.0',
    ],
    entry_points={
        'console_scripts': [
            'crossdesign=crossdesign.cli:cli',
        ],
    },
    python_requires='>=3.9',
)
