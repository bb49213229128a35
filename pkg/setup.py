from setuptools import setup, find_packages

setup(
    name="rdicausal",
    version="0.1.0",
    description="Causal effect of chemotherapy dose intensity on event-free survival",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    package_dir={'': '.'},
    python_requires=">=3.8",
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.8",
        "pandas>=1.5",
    ],
    entry_points={
        'console_scripts': [
            'rdicausal=src.cli:main',
        ],
    },
    include_package_data=True,
    zip_safe=False,
)
